#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "taillight/numerics.hpp"

using namespace taillight;
using doctest::Approx;

namespace {
template <class F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::IoError;
}
}  // namespace

TEST_CASE("normalize") {
    const Vector a = normalize(Vector{3, 4});
    CHECK(a[0] == Approx(0.6).epsilon(1e-15));
    CHECK(a[1] == Approx(0.8).epsilon(1e-15));
    CHECK(normalize(Vector{1, 0, 0}) == Vector{1, 0, 0});
    CHECK(code_of([] { normalize(Vector{0, 0}); }) == ErrorCode::ZeroNorm);
}

TEST_CASE("normalize is scale invariant and returns unit vectors") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> scale(1e-3, 1e3);
    for (int trial = 0; trial < 200; ++trial) {
        Vector v(1 + trial % 9);
        for (auto& x : v) x = g(rng);
        const double c = scale(rng);
        Vector cv = v;
        for (auto& x : cv) x *= c;
        const Vector a = normalize(v), b = normalize(cv);
        CHECK(oracle::max_abs_diff(a, b) < 1e-12);
        CHECK(std::abs(norm2(a) - 1.0) < 1e-12);
    }
}

TEST_CASE("cosine similarity") {
    CHECK(cosine_similarity(Vector{2, -1}, Vector{2, -1}) == Approx(1.0));
    CHECK(cosine_similarity(Vector{1, 0}, Vector{0, 3}) == Approx(0.0));
    CHECK(cosine_similarity(Vector{1, 0}, Vector{1, 1}) == Approx(0.70710678).epsilon(1e-8));
    CHECK(code_of([] { cosine_similarity(Vector{0, 0}, Vector{1, 1}); }) == ErrorCode::ZeroNorm);
    CHECK(code_of([] { cosine_similarity(Vector{1}, Vector{1, 1}); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("simplex projection examples") {
    const Vector on = project_to_simplex(Vector{0.2, 0.3, 0.5});
    CHECK(oracle::max_abs_diff(on, Vector{0.2, 0.3, 0.5}) < 1e-15);

    const Vector p = project_to_simplex(Vector{1.0, 0.5, 0.5});
    CHECK(oracle::max_abs_diff(p, Vector{2.0 / 3, 1.0 / 6, 1.0 / 6}) < 1e-12);
    CHECK(oracle::max_abs_diff(p, oracle::simplex_projection(Vector{1.0, 0.5, 0.5})) < 1e-12);

    CHECK(project_to_simplex(Vector{-1, 0}) == Vector{0, 1});
    CHECK(project_to_simplex(Vector{5.0}) == Vector{1.0});
    CHECK(code_of([] { project_to_simplex(Vector{1, NAN}); }) == ErrorCode::NonFiniteInput);
}

TEST_CASE("simplex projection matches the support-enumeration oracle") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> dim(2, 12);
    std::normal_distribution<double> g(0.0, 2.0);
    for (int trial = 0; trial < 300; ++trial) {
        Vector v(static_cast<std::size_t>(dim(rng)));
        for (auto& x : v) x = g(rng);
        const Vector p = project_to_simplex(v);
        CHECK(oracle::max_abs_diff(p, oracle::simplex_projection(v)) < 1e-9);
        double s = 0.0;
        for (double x : p) {
            CHECK(x >= 0.0);
            s += x;
        }
        CHECK(std::abs(s - 1.0) < 1e-12);
        // idempotent
        CHECK(oracle::max_abs_diff(project_to_simplex(p), p) < 1e-12);
    }
}

TEST_CASE("simplex projection handles ties deterministically") {
    const Vector p = project_to_simplex(Vector{0.5, 0.5, 0.5, 0.5});
    for (double x : p) CHECK(x == Approx(0.25).epsilon(1e-15));
    const Vector q = project_to_simplex(Vector{3, 3, -3});
    CHECK(q == Vector{0.5, 0.5, 0.0});
}

TEST_CASE("row softmax") {
    Matrix m(1, 3, 7.25);
    Matrix s = row_softmax(m, 0.3);
    for (std::size_t c = 0; c < 3; ++c) CHECK(s(0, c) == Approx(1.0 / 3).epsilon(1e-15));

    Matrix two(1, 2);
    two(0, 0) = 1.0;
    s = row_softmax(two, 1.0);
    CHECK(s(0, 0) == Approx(0.73105858).epsilon(1e-8));
    CHECK(s(0, 1) == Approx(0.26894142).epsilon(1e-8));

    two(0, 0) = 10.0;
    s = row_softmax(two, 0.1);
    CHECK(s(0, 0) == 1.0);
    CHECK(s(0, 1) == Approx(3.7200759760208e-44).epsilon(1e-10));
    CHECK(s(0, 0) + s(0, 1) == 1.0);

    CHECK(code_of([&] { row_softmax(two, 0.0); }) == ErrorCode::NonPositiveTemperature);
    CHECK(code_of([&] { row_softmax(two, -1.0); }) == ErrorCode::NonPositiveTemperature);
}

TEST_CASE("row softmax rows sum to one for wide inputs") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-500.0, 500.0);
    Matrix m(50, 9);
    for (double& x : m.data()) x = u(rng);
    for (double t : {0.01, 0.1, 1.0, 10.0}) {
        const Matrix s = row_softmax(m, t);
        for (std::size_t r = 0; r < s.rows(); ++r) {
            double sum = 0.0;
            for (double x : s.row(r)) sum += x;
            CHECK(std::abs(sum - 1.0) < 1e-12);
        }
        const Matrix l = row_log_softmax(m, t);
        for (std::size_t i = 0; i < l.data().size(); ++i)
            if (s.data()[i] > 1e-300) CHECK(std::exp(l.data()[i]) == Approx(s.data()[i]).epsilon(1e-12));
    }
}

TEST_CASE("symmetric KL") {
    Matrix p(1, 2, 0.5), q(1, 2);
    q(0, 0) = 0.9;
    q(0, 1) = 0.1;
    const double kl = 0.5 * (0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1) + 0.9 * std::log(0.9 / 0.5) +
                             0.1 * std::log(0.1 / 0.5));
    CHECK(symmetric_kl(p, q) == Approx(kl).epsilon(1e-14));
    CHECK(symmetric_kl(p, q) == Approx(0.43944).epsilon(1e-4));
    CHECK(symmetric_kl(q, p) == symmetric_kl(p, q));
    CHECK(symmetric_kl(p, p) == 0.0);

    CHECK(code_of([&] { symmetric_kl(p, Matrix(2, 2, 0.5)); }) == ErrorCode::ShapeMismatch);
    Matrix zero(1, 2);
    zero(0, 0) = 1.0;
    CHECK(code_of([&] { symmetric_kl(p, zero); }) == ErrorCode::NonPositiveEntry);
}

TEST_CASE("symmetric KL is nonnegative and zero only on equality") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 100; ++trial) {
        Matrix a(4, 5), b(4, 5);
        for (double& x : a.data()) x = g(rng);
        for (double& x : b.data()) x = g(rng);
        const Matrix p = row_softmax(a, 0.5), q = row_softmax(b, 0.5);
        CHECK(symmetric_kl(p, q) > 0.0);
        CHECK(std::abs(symmetric_kl(p, p)) < 1e-12);
    }
}

TEST_CASE("finite differences") {
    const auto sq = [](std::span<const double> x) { return dot(x, x); };
    Vector g = finite_difference_gradient(sq, Vector{1, 2});
    CHECK(std::abs(g[0] - 2) < 1e-8);
    CHECK(std::abs(g[1] - 4) < 1e-8);

    g = finite_difference_gradient([](std::span<const double>) { return 3.5; }, Vector{1, 2, 3});
    CHECK(g == Vector{0, 0, 0});

    g = finite_difference_gradient([](std::span<const double> x) { return x[0] * x[1]; }, Vector{3, 5});
    CHECK(std::abs(g[0] - 5) < 1e-8);
    CHECK(std::abs(g[1] - 3) < 1e-8);

    CHECK(code_of([] {
              finite_difference_gradient([](std::span<const double> x) { return std::log(x[0]); }, Vector{0.0});
          }) == ErrorCode::NonFiniteEvaluation);
}

TEST_CASE("gaussian sampling") {
    CovarianceFactor zero{Matrix(3, 3)};
    Rng rng(5);
    const Vector mean{1.5, -2.0, 0.25};
    const Matrix rows = sample_gaussian(mean, zero, 4, rng);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 3; ++c) CHECK(rows(r, c) == mean[c]);

    CovarianceFactor f{Matrix::identity(3)};
    Rng a(99), b(99);
    CHECK(sample_gaussian(mean, f, 16, a) == sample_gaussian(mean, f, 16, b));

    CovarianceFactor one{Matrix::identity(1)};
    Rng big(1234);
    const Matrix s = sample_gaussian(Vector{0.0}, one, 100000, big);
    double m = 0.0, v = 0.0;
    for (double x : s.data()) m += x;
    m /= 100000.0;
    for (double x : s.data()) v += (x - m) * (x - m);
    v /= 99999.0;
    CHECK(std::abs(m) < 0.02);
    CHECK(std::abs(v - 1.0) < 0.05);

    Rng c(1);
    CHECK(code_of([&] { sample_gaussian(Vector{0, 0}, one, 1, c); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("cholesky") {
    Matrix spd(3, 3);
    const double vals[3][3] = {{4, 2, 0.4}, {2, 5, 1}, {0.4, 1, 3}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) spd(i, j) = vals[i][j];
    const CovarianceFactor f = cholesky(spd);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = i + 1; j < 3; ++j) CHECK(f.lower(i, j) == 0.0);
    const Matrix back = f.covariance();
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(back(i, j) == Approx(spd(i, j)).epsilon(1e-12));

    Matrix bad(2, 2, 1.0);
    bad(1, 1) = 0.5;
    CHECK(code_of([&] { cholesky(bad); }) == ErrorCode::NotPositiveDefinite);
}
