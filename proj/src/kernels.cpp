#include "drrho/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

#include <omp.h>

namespace drrho::kernels {
namespace {

// Shared per-row bodies; the loops that call them differ only in the pragma.

long embed_row(const Matrix& w, const Matrix& raw, Matrix& out, std::vector<double>& norms, std::size_t i) {
  const auto x = raw.row(i);
  auto e = out.row(i);
  for (std::size_t a = 0; a < w.rows(); ++a) e[a] = dot(w.row(a), x);
  const double norm = std::sqrt(dot(e, e));
  norms[i] = norm;
  if (!(norm >= kDegenerateNorm)) return static_cast<long>(i);
  for (double& v : e) v /= norm;
  return -1;
}

void gram_row(const Matrix& a, const Matrix& b, Matrix& s, std::size_t i) {
  const auto ai = a.row(i);
  for (std::size_t j = 0; j < b.rows(); ++j) s(i, j) = dot(ai, b.row(j));
}

// dL/dh_i for one row of one tower: the upstream gradient dL/de_i is
// sum_j g(i, j) partner_j (or the transposed sum), projected onto the tangent
// space of the unit sphere at e_i and divided by |h_i|.
void tangent_row(const Matrix& grad_s, bool transpose, const Matrix& partner, const Matrix& e,
                 const std::vector<double>& norms, Matrix& dh, std::size_t i) {
  auto out = dh.row(i);
  std::fill(out.begin(), out.end(), 0.0);
  const std::size_t others = transpose ? grad_s.rows() : grad_s.cols();
  for (std::size_t j = 0; j < others; ++j) {
    const double g = transpose ? grad_s(j, i) : grad_s(i, j);
    if (g == 0.0) continue;
    const auto p = partner.row(j);
    for (std::size_t a = 0; a < out.size(); ++a) out[a] += g * p[a];
  }
  const auto ei = e.row(i);
  const double radial = dot(ei, out);
  for (std::size_t a = 0; a < out.size(); ++a) out[a] = (out[a] - radial * ei[a]) / norms[i];
}

// grad_w(a, :) = sum_i dh(i, a) raw(i, :), accumulated in increasing i.
void weight_row(const Matrix& dh, const Matrix& raw, Matrix& grad_w, std::size_t a) {
  auto out = grad_w.row(a);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    const double g = dh(i, a);
    if (g == 0.0) continue;
    const auto x = raw.row(i);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += g * x[c];
  }
}

bool g_parallel = true;

}  // namespace

namespace serial {

long embed(const Matrix& w, const Matrix& raw, Matrix& out, std::vector<double>& norms) {
  out = Matrix(raw.rows(), w.rows());
  norms.assign(raw.rows(), 0.0);
  long bad = -1;
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    const long r = embed_row(w, raw, out, norms, i);
    if (r >= 0 && bad < 0) bad = r;
  }
  return bad;
}

void gram(const Matrix& a, const Matrix& b, Matrix& s) {
  s = Matrix(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) gram_row(a, b, s, i);
}

void backward(const Matrix& grad_s, const Matrix& x, const Matrix& y, const Matrix& e1, const Matrix& e2,
              const std::vector<double>& norms1, const std::vector<double>& norms2, Matrix& grad_w1,
              Matrix& grad_w2) {
  const std::size_t d = e1.cols();
  Matrix dh1(e1.rows(), d), dh2(e2.rows(), d);
  for (std::size_t i = 0; i < e1.rows(); ++i) tangent_row(grad_s, false, e2, e1, norms1, dh1, i);
  for (std::size_t j = 0; j < e2.rows(); ++j) tangent_row(grad_s, true, e1, e2, norms2, dh2, j);
  grad_w1 = Matrix(d, x.cols());
  grad_w2 = Matrix(d, y.cols());
  for (std::size_t a = 0; a < d; ++a) weight_row(dh1, x, grad_w1, a);
  for (std::size_t a = 0; a < d; ++a) weight_row(dh2, y, grad_w2, a);
}

}  // namespace serial

namespace parallel {

long embed(const Matrix& w, const Matrix& raw, Matrix& out, std::vector<double>& norms) {
  out = Matrix(raw.rows(), w.rows());
  norms.assign(raw.rows(), 0.0);
  const auto n = static_cast<long>(raw.rows());
  long bad = -1;
#pragma omp parallel for schedule(static) reduction(max : bad)
  for (long i = 0; i < n; ++i) {
    // Report the lowest degenerate index to match the serial kernel.
    const long r = embed_row(w, raw, out, norms, static_cast<std::size_t>(i));
    if (r >= 0) bad = std::max(bad, n - r);
  }
  return bad > 0 ? n - bad : -1;
}

void gram(const Matrix& a, const Matrix& b, Matrix& s) {
  s = Matrix(a.rows(), b.rows());
  const auto n = static_cast<long>(a.rows());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) gram_row(a, b, s, static_cast<std::size_t>(i));
}

void backward(const Matrix& grad_s, const Matrix& x, const Matrix& y, const Matrix& e1, const Matrix& e2,
              const std::vector<double>& norms1, const std::vector<double>& norms2, Matrix& grad_w1,
              Matrix& grad_w2) {
  const std::size_t d = e1.cols();
  Matrix dh1(e1.rows(), d), dh2(e2.rows(), d);
  grad_w1 = Matrix(d, x.cols());
  grad_w2 = Matrix(d, y.cols());
  const auto n1 = static_cast<long>(e1.rows());
  const auto n2 = static_cast<long>(e2.rows());
  const auto dl = static_cast<long>(d);
#pragma omp parallel
  {
#pragma omp for schedule(static) nowait
    for (long i = 0; i < n1; ++i) tangent_row(grad_s, false, e2, e1, norms1, dh1, static_cast<std::size_t>(i));
#pragma omp for schedule(static)
    for (long j = 0; j < n2; ++j) tangent_row(grad_s, true, e1, e2, norms2, dh2, static_cast<std::size_t>(j));
#pragma omp for schedule(static) nowait
    for (long a = 0; a < dl; ++a) weight_row(dh1, x, grad_w1, static_cast<std::size_t>(a));
#pragma omp for schedule(static)
    for (long a = 0; a < dl; ++a) weight_row(dh2, y, grad_w2, static_cast<std::size_t>(a));
  }
}

}  // namespace parallel

const KernelSet& active() { return g_parallel ? kParallel : kSerial; }

void use_parallel(bool on) { g_parallel = on; }

void configure_threads_from_env() {
  const char* env = std::getenv("DRRHO_THREADS");
  if (env == nullptr) return;
  try {
    const int n = std::stoi(env);
    if (n > 0) omp_set_num_threads(n);
  } catch (const std::exception&) {
  }
}

}  // namespace drrho::kernels
