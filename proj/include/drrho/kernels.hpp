#pragma once

#include <vector>

#include "drrho/matrix.hpp"

// Dense kernels behind the encoder. Each kernel exists twice: a plain serial
// loop nest kept as the reference, and an OpenMP version that splits the
// outermost loop across threads. Every output element is accumulated in the
// same order in both, so the two agree bit for bit at any thread count.

namespace drrho::kernels {

/// Norm below which a projected vector is treated as degenerate.
inline constexpr double kDegenerateNorm = 1e-12;

/// out.row(i) = W x_i / |W x_i|, norms[i] = |W x_i|.
/// Returns the first degenerate row index, or -1 if none.
using EmbedFn = long (*)(const Matrix& w, const Matrix& raw, Matrix& out, std::vector<double>& norms);

/// s(i, j) = <a_i, b_j>.
using GramFn = void (*)(const Matrix& a, const Matrix& b, Matrix& s);

/// Back-propagates dL/ds through s = <e1_i, e2_j> and the normalizations:
/// fills grad_w1 (d x d_x) and grad_w2 (d x d_y).
using BackwardFn = void (*)(const Matrix& grad_s, const Matrix& x, const Matrix& y, const Matrix& e1,
                            const Matrix& e2, const std::vector<double>& norms1,
                            const std::vector<double>& norms2, Matrix& grad_w1, Matrix& grad_w2);

namespace serial {
long embed(const Matrix& w, const Matrix& raw, Matrix& out, std::vector<double>& norms);
void gram(const Matrix& a, const Matrix& b, Matrix& s);
void backward(const Matrix& grad_s, const Matrix& x, const Matrix& y, const Matrix& e1, const Matrix& e2,
              const std::vector<double>& norms1, const std::vector<double>& norms2, Matrix& grad_w1,
              Matrix& grad_w2);
}  // namespace serial

namespace parallel {
long embed(const Matrix& w, const Matrix& raw, Matrix& out, std::vector<double>& norms);
void gram(const Matrix& a, const Matrix& b, Matrix& s);
void backward(const Matrix& grad_s, const Matrix& x, const Matrix& y, const Matrix& e1, const Matrix& e2,
              const std::vector<double>& norms1, const std::vector<double>& norms2, Matrix& grad_w1,
              Matrix& grad_w2);
}  // namespace parallel

struct KernelSet {
  EmbedFn embed;
  GramFn gram;
  BackwardFn backward;
};

inline constexpr KernelSet kSerial{serial::embed, serial::gram, serial::backward};
inline constexpr KernelSet kParallel{parallel::embed, parallel::gram, parallel::backward};

/// Kernels used by the library. Parallel unless switched off.
const KernelSet& active();
void use_parallel(bool on);

/// Caps the OpenMP team size from the DRRHO_THREADS environment variable.
/// Leaves the runtime default when the variable is unset or invalid.
void configure_threads_from_env();

}  // namespace drrho::kernels
