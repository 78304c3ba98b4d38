#include "taillight/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace taillight {

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

Matrix CovarianceFactor::covariance() const {
    const std::size_t d = dim();
    Matrix s(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k <= std::min(i, j); ++k) acc += lower(i, k) * lower(j, k);
            s(i, j) = acc;
        }
    return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw Error(ErrorCode::DimensionMismatch,
                    "dot of sizes " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

void require_finite(std::span<const double> v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw Error(ErrorCode::NonFiniteInput, std::string(what) + " has a non-finite entry");
}

Vector normalize(std::span<const double> v) {
    const double n = norm2(v);
    if (n < 1e-15) throw Error(ErrorCode::ZeroNorm, "cannot normalize a zero vector");
    Vector out(v.begin(), v.end());
    for (double& x : out) x /= n;
    return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "cosine of unequal sizes");
    const double na = norm2(a);
    const double nb = norm2(b);
    if (na < 1e-15 || nb < 1e-15) throw Error(ErrorCode::ZeroNorm, "cosine with a zero vector");
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

Vector project_to_simplex(std::span<const double> v) {
    if (v.empty()) throw Error(ErrorCode::DimensionMismatch, "simplex projection of empty vector");
    require_finite(v, "simplex input");

    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });

    // Largest k (1-based count) with v_(k) - (sum_{j<=k} v_(j) - 1)/k > 0.
    double prefix = 0.0;
    double tau = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        prefix += v[order[k]];
        const double candidate = (prefix - 1.0) / static_cast<double>(k + 1);
        if (v[order[k]] - candidate > 0.0) tau = candidate;
    }

    Vector out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = std::max(v[i] - tau, 0.0);

    // Fold the rounding residual into the largest entry so the sum is 1.
    double sum = 0.0;
    for (double x : out) sum += x;
    out[order[0]] += 1.0 - sum;
    if (out[order[0]] < 0.0) out[order[0]] = 0.0;
    return out;
}

bool on_simplex(std::span<const double> w, double tol) {
    double sum = 0.0;
    for (double x : w) {
        if (!(x >= 0.0)) return false;
        sum += x;
    }
    return std::abs(sum - 1.0) <= tol;
}

Matrix row_log_softmax(const Matrix& m, double temperature) {
    if (!(temperature > 0.0))
        throw Error(ErrorCode::NonPositiveTemperature, "temperature must be positive");
    Matrix out(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto in = m.row(r);
        auto o = out.row(r);
        double mx = -std::numeric_limits<double>::infinity();
        for (double x : in) mx = std::max(mx, x / temperature);
        double s = 0.0;
        for (double x : in) s += std::exp(x / temperature - mx);
        const double lse = mx + std::log(s);
        for (std::size_t c = 0; c < in.size(); ++c) o[c] = in[c] / temperature - lse;
    }
    return out;
}

Matrix row_softmax(const Matrix& m, double temperature) {
    if (!(temperature > 0.0))
        throw Error(ErrorCode::NonPositiveTemperature, "temperature must be positive");
    Matrix out(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto in = m.row(r);
        auto o = out.row(r);
        double mx = -std::numeric_limits<double>::infinity();
        for (double x : in) mx = std::max(mx, x / temperature);
        double s = 0.0;
        for (std::size_t c = 0; c < in.size(); ++c) {
            o[c] = std::exp(in[c] / temperature - mx);
            s += o[c];
        }
        for (double& x : o) x /= s;
    }
    return out;
}

double symmetric_kl(const Matrix& p, const Matrix& q) {
    if (p.rows() != q.rows() || p.cols() != q.cols())
        throw Error(ErrorCode::ShapeMismatch, "symmetric_kl operands differ in shape");
    if (p.rows() == 0) throw Error(ErrorCode::ShapeMismatch, "symmetric_kl of empty matrices");
    double total = 0.0;
    for (std::size_t r = 0; r < p.rows(); ++r) {
        double row = 0.0;
        for (std::size_t c = 0; c < p.cols(); ++c) {
            const double a = p(r, c);
            const double b = q(r, c);
            if (!(a > 0.0) || !(b > 0.0))
                throw Error(ErrorCode::NonPositiveEntry, "symmetric_kl requires strictly positive entries");
            row += (a - b) * (std::log(a) - std::log(b));
        }
        total += row;
    }
    return total / (2.0 * static_cast<double>(p.rows()));
}

Vector finite_difference_gradient(const ScalarFunction& f, std::span<const double> x, double h) {
    Vector probe(x.begin(), x.end());
    Vector grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + h;
        const double fp = f(probe);
        probe[i] = orig - h;
        const double fm = f(probe);
        probe[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw Error(ErrorCode::NonFiniteEvaluation,
                        "non-finite function value around coordinate " + std::to_string(i));
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

Matrix sample_gaussian(std::span<const double> mean, const CovarianceFactor& factor,
                       std::size_t count, Rng& rng) {
    const std::size_t d = mean.size();
    if (factor.dim() != d || factor.lower.cols() != d)
        throw Error(ErrorCode::DimensionMismatch, "covariance factor does not match mean");
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix out(count, d);
    Vector z(d);
    for (std::size_t s = 0; s < count; ++s) {
        for (double& zi : z) zi = normal(rng);
        auto row = out.row(s);
        for (std::size_t i = 0; i < d; ++i) {
            double acc = mean[i];
            for (std::size_t k = 0; k <= i; ++k) acc += factor.lower(i, k) * z[k];
            row[i] = acc;
        }
    }
    return out;
}

CovarianceFactor cholesky(const Matrix& spd) {
    const std::size_t n = spd.rows();
    if (spd.cols() != n) throw Error(ErrorCode::ShapeMismatch, "cholesky needs a square matrix");
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double diag = spd(j, j);
        for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
        if (!(diag > 0.0))
            throw Error(ErrorCode::NotPositiveDefinite, "pivot " + std::to_string(j) + " is not positive");
        l(j, j) = std::sqrt(diag);
        for (std::size_t i = j + 1; i < n; ++i) {
            double acc = spd(i, j);
            for (std::size_t k = 0; k < j; ++k) acc -= l(i, k) * l(j, k);
            l(i, j) = acc / l(j, j);
        }
    }
    return CovarianceFactor{std::move(l)};
}

}  // namespace taillight
