#include "drrho/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "drrho/contrastive.hpp"
#include "drrho/error.hpp"
#include "drrho/rng.hpp"

namespace drrho {
namespace {

void require_square(const SimilarityMatrix& s) {
  if (!s.square() || s.size() == 0) throw ArgumentError("similarity matrix must be square and non-empty");
}

void require_same_shape(const SimilarityMatrix& a, const SimilarityMatrix& b) {
  require_square(a);
  if (b.values.rows() != a.values.rows() || b.values.cols() != a.values.cols())
    throw ArgumentError("target and reference similarity shapes differ");
}

// Row-wise (or column-wise) log-softmax of s / tau.
Matrix log_softmax(const SimilarityMatrix& s, double tau, bool columns) {
  const std::size_t b = s.size();
  Matrix out(b, b);
  for (std::size_t a = 0; a < b; ++a) {
    const auto at = [&](std::size_t k) { return (columns ? s(k, a) : s(a, k)) / tau; };
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < b; ++k) m = std::max(m, at(k));
    double z = 0.0;
    for (std::size_t k = 0; k < b; ++k) z += std::exp(at(k) - m);
    const double lse = m + std::log(z);
    for (std::size_t k = 0; k < b; ++k) (columns ? out(k, a) : out(a, k)) = at(k) - lse;
  }
  return out;
}

double tau_grad_from_s(const SimilarityMatrix& s, const Matrix& grad_s, double tau) {
  // The loss depends on s only through s / tau.
  double g = 0.0;
  for (std::size_t k = 0; k < grad_s.size(); ++k) g -= grad_s.data()[k] * s.values.data()[k];
  return g / tau;
}

void require_tau(double tau, const char* name) {
  if (!(tau > 0.0)) throw ArgumentError(std::string(name) + " must be positive");
}

}  // namespace

SimilarityLoss infonce_loss_grad(const SimilarityMatrix& s, double tau) {
  require_square(s);
  require_tau(tau, "tau");
  const std::size_t b = s.size();
  const auto lr = log_softmax(s, tau, false);
  const auto lc = log_softmax(s, tau, true);
  SimilarityLoss out{0.0, Matrix(b, b), 0.0};
  double row = 0.0, col = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    row -= lr(i, i);
    col -= lc(i, i);
  }
  const double bd = static_cast<double>(b);
  out.value = 0.5 * (row + col) / bd;
  const double scale = 0.5 / (bd * tau);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j) {
      const double delta = i == j ? 1.0 : 0.0;
      out.grad_s(i, j) = scale * ((std::exp(lr(i, j)) - delta) + (std::exp(lc(i, j)) - delta));
    }
  out.grad_tau = tau_grad_from_s(s, out.grad_s, tau);
  return out;
}

double infonce_loss(const SimilarityMatrix& s, double tau) { return infonce_loss_grad(s, tau).value; }

SimilarityLoss distillation_loss_grad(const SimilarityMatrix& target, const SimilarityMatrix& reference, double tau,
                                      double tau_ref) {
  require_same_shape(target, reference);
  require_tau(tau, "tau");
  require_tau(tau_ref, "tau_ref");
  const std::size_t b = target.size();
  const auto lr = log_softmax(target, tau, false);
  const auto lc = log_softmax(target, tau, true);
  const auto hr = log_softmax(reference, tau_ref, false);
  const auto hc = log_softmax(reference, tau_ref, true);
  const double bb = static_cast<double>(b * b);
  SimilarityLoss out{0.0, Matrix(b, b), 0.0};
  double ce = 0.0;
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j) {
      const double pr_hat = std::exp(hr(i, j));
      const double pc_hat = std::exp(hc(i, j));
      ce -= pr_hat * lr(i, j) + pc_hat * lc(i, j);
      out.grad_s(i, j) = -((pr_hat - std::exp(lr(i, j))) + (pc_hat - std::exp(lc(i, j)))) / (bb * tau);
    }
  out.value = ce / bb;
  out.grad_tau = tau_grad_from_s(target, out.grad_s, tau);
  return out;
}

double distillation_loss(const SimilarityMatrix& target, const SimilarityMatrix& reference, double tau,
                         double tau_ref) {
  return distillation_loss_grad(target, reference, tau, tau_ref).value;
}

double combined_objective(double con_loss, double dist_loss, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ArgumentError("lambda must be in [0, 1]");
  return (1.0 - lambda) * con_loss + lambda * dist_loss;
}

Matrix gcl_trainer_step(TrainerState& state, const TrainerConfig& config, std::span<const std::size_t> batch,
                        const SimilarityMatrix& target) {
  update_u(state, config, batch, target, nullptr);
  return gradient_estimator(state, config, batch, target, nullptr);
}

std::size_t selection_size(double ratio, std::size_t super_size) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ArgumentError("selection ratio must be in (0, 1]");
  // The small offset keeps products like 0.2 * 25600 from rounding up.
  return static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(super_size) - 1e-9));
}

SelectionOutcome jest_select(const SimilarityMatrix& target, const SimilarityMatrix* reference,
                             std::span<const std::size_t> super_batch, const JestParams& params) {
  require_square(target);
  if (target.size() != super_batch.size()) throw ArgumentError("similarity size does not match the super-batch");
  if (params.n_chunks < 1) throw ArgumentError("n_chunks must be >= 1");
  if (params.n_chunks > 1 && reference == nullptr) throw ArgumentError("later chunks need reference similarities");
  if (reference) require_same_shape(target, *reference);
  require_tau(params.tau, "tau");
  require_tau(params.temperature, "selection temperature");
  const std::size_t total = selection_size(params.ratio, super_batch.size());
  if (total < params.n_chunks) throw ArgumentError("ratio * |super-batch| is smaller than the number of chunks");

  const std::size_t chunk = total / params.n_chunks;
  SelectionOutcome out;
  out.super_batch.assign(super_batch.begin(), super_batch.end());
  out.seed = params.seed;
  Rng rng(params.seed);

  std::vector<std::size_t> remaining(super_batch.size());
  std::iota(remaining.begin(), remaining.end(), 0);
  std::vector<std::size_t> chosen;  // positions

  for (std::size_t c = 0; c < params.n_chunks; ++c) {
    const std::size_t take = c + 1 == params.n_chunks ? total - chunk * (params.n_chunks - 1) : chunk;
    std::vector<double> scores(remaining.size());
    for (std::size_t r = 0; r < remaining.size(); ++r) {
      const std::size_t p = remaining[r];
      if (c == 0) {
        scores[r] = target(p, p);
        continue;
      }
      std::vector<double> img, txt;
      img.reserve(chosen.size());
      txt.reserve(chosen.size());
      for (std::size_t q : chosen) {
        img.push_back(((target(p, q) - target(p, p)) - ((*reference)(p, q) - (*reference)(p, p))) / params.tau);
        txt.push_back(((target(q, p) - target(p, p)) - ((*reference)(q, p) - (*reference)(p, p))) / params.tau);
      }
      scores[r] = params.tau * (log_mean_exp(img) + log_mean_exp(txt));
    }

    ChunkTrace trace;
    std::vector<bool> taken(remaining.size(), false);
    if (params.mode == SelectionMode::topk) {
      std::vector<std::size_t> order(remaining.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
      for (std::size_t k = 0; k < take; ++k) {
        taken[order[k]] = true;
        trace.selected.push_back(remaining[order[k]]);
        trace.scores.push_back(scores[order[k]]);
      }
    } else {
      for (std::size_t k = 0; k < take; ++k) {
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < remaining.size(); ++r)
          if (!taken[r]) m = std::max(m, scores[r]);
        std::vector<double> w(remaining.size(), 0.0);
        double z = 0.0;
        for (std::size_t r = 0; r < remaining.size(); ++r)
          if (!taken[r]) z += (w[r] = std::exp((scores[r] - m) / params.temperature));
        const double u = rng.uniform() * z;
        double acc = 0.0;
        std::size_t pick = remaining.size();
        for (std::size_t r = 0; r < remaining.size(); ++r) {
          if (taken[r]) continue;
          pick = r;  // falls back to the last candidate on rounding
          acc += w[r];
          if (u < acc) break;
        }
        taken[pick] = true;
        trace.selected.push_back(remaining[pick]);
        trace.scores.push_back(scores[pick]);
      }
    }

    std::vector<std::size_t> next;
    for (std::size_t r = 0; r < remaining.size(); ++r)
      if (!taken[r]) next.push_back(remaining[r]);
    remaining = std::move(next);
    chosen.insert(chosen.end(), trace.selected.begin(), trace.selected.end());
    for (auto& p : trace.selected) p = super_batch[p];
    out.selected.insert(out.selected.end(), trace.selected.begin(), trace.selected.end());
    out.chunks.push_back(std::move(trace));
  }
  return out;
}

}  // namespace drrho
