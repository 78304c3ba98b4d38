#include "taillight/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace taillight::kernels {
namespace {

void check_affine(const Matrix& w, std::span<const double> b, const Matrix& x) {
    if (w.cols() != x.cols() || w.rows() != b.size())
        throw Error(ErrorCode::DimensionMismatch, "adapter shape does not match features");
}

void affine_row(const Matrix& w, std::span<const double> b, std::span<const double> in,
                std::span<double> out) {
    for (std::size_t r = 0; r < w.rows(); ++r) {
        auto wr = w.row(r);
        double acc = b[r];
        for (std::size_t c = 0; c < in.size(); ++c) acc += wr[c] * in[c];
        out[r] = acc;
    }
}

void gram_row(const Matrix& u, std::size_t i, Matrix& out) {
    auto ui = u.row(i);
    for (std::size_t j = 0; j < u.rows(); ++j) {
        auto uj = u.row(j);
        double acc = 0.0;
        for (std::size_t k = 0; k < ui.size(); ++k) acc += ui[k] * uj[k];
        out(i, j) = acc;
    }
}

// out_i = sum_j (G_ij + G_ji) u_j
void gram_backward_row(const Matrix& g, const Matrix& u, std::size_t i, Matrix& out) {
    auto o = out.row(i);
    std::fill(o.begin(), o.end(), 0.0);
    for (std::size_t j = 0; j < u.rows(); ++j) {
        const double coeff = g(i, j) + g(j, i);
        auto uj = u.row(j);
        for (std::size_t k = 0; k < o.size(); ++k) o[k] += coeff * uj[k];
    }
}

void log_softmax_row(std::span<const double> in, double temperature, std::span<double> out) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : in) mx = std::max(mx, x / temperature);
    double s = 0.0;
    for (double x : in) s += std::exp(x / temperature - mx);
    const double lse = mx + std::log(s);
    for (std::size_t c = 0; c < in.size(); ++c) out[c] = in[c] / temperature - lse;
}

void alignment_row(const Matrix& sv, const Matrix& st, double temperature, std::size_t i,
                   AlignmentRows& out) {
    const std::size_t n = sv.cols();
    const double scale = 1.0 / (2.0 * static_cast<double>(sv.rows()));
    std::vector<double> lp(n), lq(n);
    log_softmax_row(sv.row(i), temperature, lp);
    log_softmax_row(st.row(i), temperature, lq);

    double kl_pq = 0.0, kl_qp = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double p = std::exp(lp[j]);
        const double q = std::exp(lq[j]);
        kl_pq += p * (lp[j] - lq[j]);
        kl_qp += q * (lq[j] - lp[j]);
    }
    out.row_loss[i] = scale * (kl_pq + kl_qp);

    auto gv = out.grad_visual.row(i);
    auto gt = out.grad_semantic.row(i);
    for (std::size_t j = 0; j < n; ++j) {
        const double p = std::exp(lp[j]);
        const double q = std::exp(lq[j]);
        gv[j] = scale / temperature * (p * (lp[j] - lq[j] + 1.0 - kl_pq) - q);
        gt[j] = scale / temperature * (q * (lq[j] - lp[j] + 1.0 - kl_qp) - p);
    }
}

AlignmentRows make_alignment(const Matrix& sv, const Matrix& st, double temperature) {
    if (sv.rows() != st.rows() || sv.cols() != st.cols())
        throw Error(ErrorCode::ShapeMismatch, "similarity matrices differ in shape");
    if (sv.rows() == 0) throw Error(ErrorCode::ShapeMismatch, "empty similarity matrix");
    if (!(temperature > 0.0))
        throw Error(ErrorCode::NonPositiveTemperature, "temperature must be positive");
    return AlignmentRows{Vector(sv.rows()), Matrix(sv.rows(), sv.cols()),
                         Matrix(sv.rows(), sv.cols())};
}

}  // namespace

namespace serial {

Matrix affine_rows(const Matrix& w, std::span<const double> b, const Matrix& x) {
    check_affine(w, b, x);
    Matrix out(x.rows(), w.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) affine_row(w, b, x.row(i), out.row(i));
    return out;
}

Matrix gram(const Matrix& u) {
    Matrix out(u.rows(), u.rows());
    for (std::size_t i = 0; i < u.rows(); ++i) gram_row(u, i, out);
    return out;
}

Matrix gram_backward(const Matrix& grad, const Matrix& u) {
    Matrix out(u.rows(), u.cols());
    for (std::size_t i = 0; i < u.rows(); ++i) gram_backward_row(grad, u, i, out);
    return out;
}

AlignmentRows alignment_rows(const Matrix& s_visual, const Matrix& s_semantic, double temperature) {
    AlignmentRows out = make_alignment(s_visual, s_semantic, temperature);
    for (std::size_t i = 0; i < s_visual.rows(); ++i)
        alignment_row(s_visual, s_semantic, temperature, i, out);
    return out;
}

}  // namespace serial

namespace parallel {

Matrix affine_rows(const Matrix& w, std::span<const double> b, const Matrix& x) {
    check_affine(w, b, x);
    Matrix out(x.rows(), w.rows());
    const auto n = static_cast<std::ptrdiff_t>(x.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto r = static_cast<std::size_t>(i);
        affine_row(w, b, x.row(r), out.row(r));
    }
    return out;
}

Matrix gram(const Matrix& u) {
    Matrix out(u.rows(), u.rows());
    const auto n = static_cast<std::ptrdiff_t>(u.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) gram_row(u, static_cast<std::size_t>(i), out);
    return out;
}

Matrix gram_backward(const Matrix& grad, const Matrix& u) {
    Matrix out(u.rows(), u.cols());
    const auto n = static_cast<std::ptrdiff_t>(u.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i)
        gram_backward_row(grad, u, static_cast<std::size_t>(i), out);
    return out;
}

AlignmentRows alignment_rows(const Matrix& s_visual, const Matrix& s_semantic, double temperature) {
    AlignmentRows out = make_alignment(s_visual, s_semantic, temperature);
    const auto n = static_cast<std::ptrdiff_t>(s_visual.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i)
        alignment_row(s_visual, s_semantic, temperature, static_cast<std::size_t>(i), out);
    return out;
}

}  // namespace parallel
}  // namespace taillight::kernels
