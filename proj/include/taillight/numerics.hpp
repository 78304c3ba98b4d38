#pragma once
// Dense 64-bit primitives shared by every module. All reductions run in index
// order so results are bitwise reproducible.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "taillight/error.hpp"

namespace taillight {

using Vector = std::vector<double>;
using ClassId = std::uint32_t;
using Rng = std::mt19937_64;

/// Row-major dense matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    Matrix transposed() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Lower-triangular A with Sigma ~= A A^T.
struct CovarianceFactor {
    Matrix lower;

    std::size_t dim() const noexcept { return lower.rows(); }
    Matrix covariance() const;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
void require_finite(std::span<const double> v, const char* what);

/// v / ||v||. Throws ZeroNorm below 1e-15.
Vector normalize(std::span<const double> v);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Euclidean projection onto {x >= 0, sum x = 1} by the sort-and-threshold rule.
Vector project_to_simplex(std::span<const double> v);

bool on_simplex(std::span<const double> w, double tol = 1e-10);

/// Row-wise softmax of M / temperature with max subtraction.
Matrix row_softmax(const Matrix& m, double temperature);
Matrix row_log_softmax(const Matrix& m, double temperature);

/// (1/2N) sum_rows [KL(P_r||Q_r) + KL(Q_r||P_r)] for row-stochastic P, Q.
double symmetric_kl(const Matrix& p, const Matrix& q);

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h.
Vector finite_difference_gradient(const ScalarFunction& f, std::span<const double> x,
                                  double h = 1e-5);

/// Rows mean + A z, z ~ N(0, I) drawn from rng.
Matrix sample_gaussian(std::span<const double> mean, const CovarianceFactor& factor,
                       std::size_t count, Rng& rng);

/// Cholesky factor of a symmetric positive-definite matrix.
CovarianceFactor cholesky(const Matrix& spd);

}  // namespace taillight
