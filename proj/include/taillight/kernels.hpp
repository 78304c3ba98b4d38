#pragma once
// Row-parallel batch kernels. Each kernel has a serial reference in
// kernels::serial and an OpenMP version in kernels::parallel; both evaluate
// every output row with the same instruction sequence, so results are
// bitwise identical regardless of thread count.

#include <span>

#include "taillight/numerics.hpp"

namespace taillight::kernels {

/// Per-row pieces of the symmetric-KL alignment loss and its gradients with
/// respect to both similarity matrices.
struct AlignmentRows {
    Vector row_loss;  // (1/2N) [KL(P_i||Q_i) + KL(Q_i||P_i)]
    Matrix grad_visual;    // dL/dS_v
    Matrix grad_semantic;  // dL/dS_t
};

namespace serial {
Matrix affine_rows(const Matrix& w, std::span<const double> b, const Matrix& x);
Matrix gram(const Matrix& u);
Matrix gram_backward(const Matrix& grad, const Matrix& u);
AlignmentRows alignment_rows(const Matrix& s_visual, const Matrix& s_semantic, double temperature);
}  // namespace serial

namespace parallel {
Matrix affine_rows(const Matrix& w, std::span<const double> b, const Matrix& x);
Matrix gram(const Matrix& u);
Matrix gram_backward(const Matrix& grad, const Matrix& u);
AlignmentRows alignment_rows(const Matrix& s_visual, const Matrix& s_semantic, double temperature);
}  // namespace parallel

using parallel::affine_rows;
using parallel::alignment_rows;
using parallel::gram;
using parallel::gram_backward;

}  // namespace taillight::kernels
