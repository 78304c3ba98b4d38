#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "taillight/adaptive_guidance.hpp"

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

LayerFeatures basis_features(std::size_t layers, std::size_t classes, std::size_t dim) {
    LayerFeatures f;
    for (std::size_t c = 0; c < classes; ++c) f.classes.push_back(static_cast<ClassId>(c));
    f.layers.assign(layers, Matrix(classes, dim));
    return f;
}
}  // namespace

TEST_CASE("aggregate logits") {
    LayerFeatures one = basis_features(1, 3, 3);
    for (std::size_t c = 0; c < 3; ++c) one.layers[0](c, c) = 1.0;
    CHECK(aggregate_logits(Vector{0, 0, 1}, one, Vector{1.0}) == Vector{0, 0, 1});

    LayerFeatures two = basis_features(2, 2, 2);
    two.layers[0](0, 0) = 1.0;  // layer 0 logits [1, 0] for feature e0
    two.layers[1](1, 0) = 1.0;  // layer 1 logits [0, 1]
    CHECK(aggregate_logits(Vector{1, 0}, two, Vector{0.5, 0.5}) == Vector{0.5, 0.5});

    LayerFeatures zero = basis_features(2, 2, 2);
    zero.layers[0](0, 0) = 3.0;
    zero.layers[1](0, 1) = 2.0;
    const Vector z = aggregate_logits(Vector{1, 1}, zero, Vector{0.3, 0.7});
    CHECK(z[1] == 0.0);

    CHECK(code_of([&] { aggregate_logits(Vector{1, 1, 1}, zero, Vector{0.5, 0.5}); }) ==
          ErrorCode::DimensionMismatch);
}

TEST_CASE("aggregate logits is linear in the weights") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    LayerFeatures f = basis_features(4, 5, 6);
    for (auto& m : f.layers)
        for (double& x : m.data()) x = g(rng);
    Vector x(6), w1(4), w2(4), sum(4);
    for (double& v : x) v = g(rng);
    for (std::size_t l = 0; l < 4; ++l) sum[l] = (w1[l] = g(rng)) + (w2[l] = g(rng));
    const Vector a = aggregate_logits(x, f, w1), b = aggregate_logits(x, f, w2), s = aggregate_logits(x, f, sum);
    for (std::size_t i = 0; i < 5; ++i) CHECK(s[i] == Approx(a[i] + b[i]).epsilon(1e-12));
}

TEST_CASE("entropy regularizer") {
    const auto u = entropy_regularizer(Vector(4, 0.25));
    CHECK(std::abs(u.value - std::log(0.25)) < 1e-7);
    const auto h = entropy_regularizer(Vector{1, 0, 0});
    CHECK(std::abs(h.value) < 2e-8);

    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const Vector w = oracle::random_simplex_point(5, rng);
        const auto r = entropy_regularizer(w);
        const Vector fd = finite_difference_gradient(
            [](std::span<const double> p) { return entropy_regularizer(p).value; }, w, 1e-7);
        CHECK(oracle::max_abs_diff(r.gradient, fd) < 1e-6);
    }
}

TEST_CASE("layer positions and prior rows") {
    CHECK(layer_positions(4) == Vector{0, 0, 0.5, 1});
    CHECK(code_of([] { layer_positions(2); }) == ErrorCode::DegenerateTree);

    const Vector p = prior_row(1.0, Vector{0, 0.5, 1});
    CHECK(p[0] == Approx(0.1863).epsilon(1e-3));
    CHECK(p[1] == Approx(0.3072).epsilon(1e-3));
    CHECK(p[2] == Approx(0.5065).epsilon(1e-3));
    const double e = std::exp(0.5) + 1 + std::exp(1.0);
    CHECK(p[2] == Approx(std::exp(1.0) / e).epsilon(1e-14));

    // extreme kappa stays finite in the log domain
    const Vector big = log_prior_row(1e6, Vector{0, 0.5, 1});
    CHECK(std::isfinite(big[0]));
    CHECK(big[2] == 0.0);
}

TEST_CASE("frequency prior") {
    const FrequencyPrior eq = frequency_prior({{0, 50}, {1, 50}}, 4);
    CHECK(eq.kappa.at(0) == 1.0);
    CHECK(eq.mean_count == 50.0);

    const FrequencyPrior skew = frequency_prior({{0, 95}, {1, 5}}, 4);
    CHECK(skew.mean_count == 50.0);
    CHECK(skew.kappa.at(1) == 10.0);
    CHECK(skew.prior(1)[3] > 0.99);
    for (ClassId c : {0u, 1u}) {
        double s = 0.0;
        for (double x : skew.prior(c)) s += x;
        CHECK(std::abs(s - 1.0) < 1e-12);
        CHECK(skew.kappa.at(c) > 0.0);
    }
    CHECK(skew.prior(1)[3] > skew.prior(0)[3]);
    CHECK(code_of([] { frequency_prior({{0, 3}}, 2); }) == ErrorCode::DegenerateTree);
    CHECK(code_of([&] { skew.prior(9); }) == ErrorCode::UnknownClass);

    // a class whose own tree stops at layer 3 puts its top mass there
    const FrequencyPrior shallow = frequency_prior({{0, 95}, {1, 5}}, 6, {{1, 4}});
    const Vector p = shallow.prior(1);
    CHECK(p[3] > 0.99);
    CHECK(p[4] < 1e-3);
}

TEST_CASE("frequency regularizer") {
    const Vector pi = prior_row(2.0, layer_positions(5));
    Vector logpi(pi.size());
    for (std::size_t l = 0; l < pi.size(); ++l) logpi[l] = std::log(pi[l]);
    CHECK(std::abs(freq_regularizer(pi, logpi).value) < 1e-7);

    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const Vector w = oracle::random_simplex_point(5, rng);
        const auto r = freq_regularizer(w, logpi);
        CHECK(r.value >= -1e-7);
        const Vector fd = finite_difference_gradient(
            [&](std::span<const double> p) { return freq_regularizer(p, logpi).value; }, w, 1e-7);
        CHECK(oracle::max_abs_diff(r.gradient, fd) < 1e-6);
    }
}

TEST_CASE("projected updates") {
    const Vector w{0.2, 0.3, 0.5};
    CHECK(update_alpha(w, Vector{0, 0, 0}, 0.1) == w);
    CHECK(update_alpha(w, Vector{-1, 1, 1}, 1e6) == Vector{1, 0, 0});
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0.0, 5.0);
    for (int trial = 0; trial < 200; ++trial) {
        Vector grad(6);
        for (double& x : grad) x = g(rng);
        const Vector out = update_alpha(oracle::random_simplex_point(6, rng), grad, 0.3);
        CHECK(on_simplex(out, 1e-10));
        for (double x : out) CHECK(x >= 0.0);
    }
}

TEST_CASE("projected gradient on the frequency term converges to the prior") {
    // moderate kappa: every prior entry is large next to the step, so the iteration contracts
    const FrequencyPrior fp = frequency_prior({{0, 100}, {1, 60}}, 5);
    const auto& logpi = fp.log_prior.at(1);
    Vector a(5, 0.2);
    for (int step = 0; step < 10000; ++step) a = update_alpha(a, freq_regularizer(a, logpi).gradient, 0.01);
    CHECK(oracle::max_abs_diff(a, fp.prior(1)) < 1e-3);

    // rare class: tiny prior entries keep fixed-step iterates bouncing off the
    // boundary, but the mass still moves to the deepest layer
    const FrequencyPrior skew = frequency_prior({{0, 200}, {1, 10}}, 5);
    Vector b(5, 0.2);
    const double start = freq_regularizer(b, skew.log_prior.at(1)).value;
    for (int step = 0; step < 2000; ++step) b = update_alpha(b, freq_regularizer(b, skew.log_prior.at(1)).gradient, 0.01);
    CHECK(freq_regularizer(b, skew.log_prior.at(1)).value < 0.2 * start);
    CHECK(weight_center(b, layer_positions(5)) > 0.8);
}

TEST_CASE("layer weights") {
    LayerWeights w(3);
    w.add_uniform(4, 0);
    w.add_class(7, 1, Vector{0, 1, 0});
    CHECK(w.row(4) == Vector(3, 1.0 / 3));
    CHECK(w.classes() == std::vector<ClassId>{4, 7});
    w.resize_layers(5);
    CHECK(w.row(7) == Vector{0, 1, 0, 0, 0});
    CHECK(on_simplex(w.row(4), 1e-12));
    CHECK(code_of([&] { w.resize_layers(2); }) == ErrorCode::DegenerateTree);
    CHECK(code_of([&] { w.row(1); }) == ErrorCode::UnknownClass);
    w.freeze(4);
    const LayerWeights back = LayerWeights::from_json(w.to_json());
    CHECK(back == w);
    CHECK(back.frozen(4));
    CHECK(!back.frozen(7));
    CHECK(weight_center(Vector{0, 0, 0, 0, 1}, layer_positions(5)) == 1.0);
}
