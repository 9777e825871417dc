#include "drrho/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "drrho/error.hpp"

namespace drrho {
namespace {

constexpr int kTernaryRounds = 80;
constexpr int kBisectionRounds = 200;
constexpr double kChi2Residual = 1e-10;

void require_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ArgumentError("tau must be a positive finite number");
}

void require_nonempty(const LossVector& l) {
  if (l.size() == 0) throw ArgumentError("loss vector is empty");
}

double sq_distance_to_uniform(std::span<const double> p) {
  const double u = 1.0 / static_cast<double>(p.size());
  double s = 0.0;
  for (double v : p) s += (v - u) * (v - u);
  return s;
}

double weighted_sum(std::span<const double> p, std::span<const double> l) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * l[i];
  return s;
}

std::vector<double> chi2_candidate(std::span<const double> l, double lambda) {
  const double u = 1.0 / static_cast<double>(l.size());
  std::vector<double> v(l.size());
  for (std::size_t i = 0; i < l.size(); ++i) v[i] = u + l[i] / lambda;
  return project_to_simplex(v);
}

// Given the support of the optimum, the weights on it are 1/k + (l_i - m)/lambda
// with lambda fixed by the ball constraint. Returns nothing if the support
// guess is inconsistent.
std::optional<Chi2Result> chi2_on_support(std::span<const double> l, const std::vector<bool>& support, double r2) {
  const double n = static_cast<double>(l.size());
  double k = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i)
    if (support[i]) {
      k += 1.0;
      mean += l[i];
    }
  if (k == 0.0) return std::nullopt;
  mean /= k;
  double ss = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i)
    if (support[i]) ss += (l[i] - mean) * (l[i] - mean);
  const double budget = r2 - (n - k) / (n * n) - k * (1.0 / k - 1.0 / n) * (1.0 / k - 1.0 / n);
  if (!(budget > 0.0) || !(ss > 0.0)) return std::nullopt;
  const double lambda = std::sqrt(ss / budget);
  Chi2Result out{0.0, std::vector<double>(l.size(), 0.0)};
  for (std::size_t i = 0; i < l.size(); ++i) {
    if (!support[i]) continue;
    out.weights[i] = 1.0 / k + (l[i] - mean) / lambda;
    if (out.weights[i] < 0.0) return std::nullopt;
  }
  // Outside the support the unclipped weight must be non-positive.
  double threshold = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < l.size(); ++i)
    if (support[i]) threshold = std::min(threshold, l[i]);
  for (std::size_t i = 0; i < l.size(); ++i)
    if (!support[i] && l[i] > threshold) return std::nullopt;
  out.risk = mean + ss / lambda;
  return out;
}

}  // namespace

LossVector::LossVector(std::vector<double> values) : values_(std::move(values)) {
  for (double v : values_)
    if (!std::isfinite(v)) throw ArgumentError("loss values must be finite");
}

LossVector::LossVector(std::vector<double> values, double lower, double upper) : LossVector(std::move(values)) {
  if (!(lower <= upper)) throw ArgumentError("loss bounds must satisfy M0 <= M1");
  for (double v : values_)
    if (v < lower || v > upper) throw ArgumentError("loss value outside declared bounds");
  bounds_ = std::make_pair(lower, upper);
}

double LossVector::mean() const {
  require_nonempty(*this);
  return std::accumulate(values_.begin(), values_.end(), 0.0) / static_cast<double>(values_.size());
}

double LossVector::max() const {
  require_nonempty(*this);
  return *std::max_element(values_.begin(), values_.end());
}

double LossVector::min() const {
  require_nonempty(*this);
  return *std::min_element(values_.begin(), values_.end());
}

double log_mean_exp(std::span<const double> x) {
  if (x.empty()) throw ArgumentError("log_mean_exp of an empty set");
  const double m = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s / static_cast<double>(x.size()));
}

double cvar_topk(const LossVector& losses, std::size_t k) {
  if (k < 1 || k > losses.size()) throw ArgumentError("k must be in [1, m]");
  std::vector<std::size_t> order(losses.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return losses[a] > losses[b]; });
  double s = 0.0;
  for (std::size_t r = 0; r < k; ++r) s += losses[order[r]];
  return s / static_cast<double>(k);
}

std::vector<double> softmax_weights(const LossVector& losses, double tau) {
  require_tau(tau);
  require_nonempty(losses);
  const double m = losses.max();
  std::vector<double> p(losses.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) z += (p[i] = std::exp((losses[i] - m) / tau));
  for (double& v : p) v /= z;
  return p;
}

double kl_regularized_risk(const LossVector& losses, double tau) {
  require_tau(tau);
  require_nonempty(losses);
  std::vector<double> scaled(losses.values().begin(), losses.values().end());
  for (double& v : scaled) v /= tau;
  return tau * log_mean_exp(scaled);
}

TauBounds kl_tau_bounds(const LossVector& losses) {
  const double scale = std::max(1.0, losses.range());
  return {1e-6 * scale, 1e6 * scale};
}

KlConstrainedResult kl_constrained_risk(const LossVector& losses, double rho, std::size_t n) {
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw ArgumentError("rho must be >= 0");
  if (n < 1) throw ArgumentError("n must be >= 1");
  require_nonempty(losses);
  const double radius = rho / static_cast<double>(n);
  const auto g = [&](double log_tau) {
    const double tau = std::exp(log_tau);
    return kl_regularized_risk(losses, tau) + tau * radius;
  };
  const auto [lo_tau, hi_tau] = kl_tau_bounds(losses);
  double a = std::log(lo_tau), b = std::log(hi_tau);
  for (int r = 0; r < kTernaryRounds; ++r) {
    const double m1 = a + (b - a) / 3.0;
    const double m2 = b - (b - a) / 3.0;
    if (g(m1) < g(m2))
      b = m2;
    else
      a = m1;
  }
  // The minimizer may be pinned to an end of the interval.
  KlConstrainedResult best{g(0.5 * (a + b)), std::exp(0.5 * (a + b))};
  for (double t : {std::log(lo_tau), std::log(hi_tau)})
    if (const double v = g(t); v < best.risk) best = {v, std::exp(t)};
  return best;
}

std::vector<double> project_to_simplex(std::span<const double> v) {
  if (v.empty()) throw ArgumentError("cannot project an empty vector");
  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0, theta = 0.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    cumulative += sorted[j];
    const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (sorted[j] - t > 0.0) theta = t;
  }
  std::vector<double> p(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) p[i] = std::max(0.0, v[i] - theta);
  return p;
}

Chi2Result chi2_dro_risk(const LossVector& losses, double rho, std::size_t n) {
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw ArgumentError("rho must be >= 0");
  if (n != losses.size()) throw ArgumentError("chi2_dro_risk needs one loss per sample (n = m)");
  require_nonempty(losses);
  const auto l = losses.values();
  const double nd = static_cast<double>(n);
  const double r2 = 2.0 * rho / (nd * nd);
  const double mean = losses.mean();
  const std::vector<double> uniform(n, 1.0 / nd);

  if (rho == 0.0 || losses.range() == 0.0) return {mean, uniform};

  // As lambda -> 0 the maximizer spreads evenly over the arg-max set; if even
  // that point is inside the ball the constraint never binds.
  const double top = losses.max();
  std::vector<double> argmax_weights(n, 0.0);
  double ties = 0.0;
  for (std::size_t i = 0; i < n; ++i) ties += (l[i] == top);
  for (std::size_t i = 0; i < n; ++i) argmax_weights[i] = (l[i] == top) ? 1.0 / ties : 0.0;
  if (sq_distance_to_uniform(argmax_weights) <= r2) return {top, argmax_weights};

  // All weights positive: closed form mean + std * sqrt(2 rho / n).
  double ss = 0.0;
  for (double v : l) ss += (v - mean) * (v - mean);
  const double lambda_interior = std::sqrt(ss / r2);
  {
    std::vector<bool> all(n, true);
    if (auto exact = chi2_on_support(l, all, r2)) return *exact;
  }

  // Distance to uniform decreases in lambda; bracket and bisect on log lambda.
  double hi = lambda_interior, lo = lambda_interior;
  while (sq_distance_to_uniform(chi2_candidate(l, lo)) < r2) {
    lo *= 0.5;
    if (lo < 1e-300) throw SolverError("chi2 solver: could not bracket the multiplier");
  }
  for (int r = 0; r < kBisectionRounds; ++r) {
    const double mid = std::sqrt(lo * hi);
    if (mid <= lo || mid >= hi) break;
    if (sq_distance_to_uniform(chi2_candidate(l, mid)) > r2)
      lo = mid;
    else
      hi = mid;
  }
  auto p = chi2_candidate(l, hi);
  std::vector<bool> support(n);
  for (std::size_t i = 0; i < n; ++i) support[i] = p[i] > 0.0;
  if (auto exact = chi2_on_support(l, support, r2)) return *exact;

  const double residual = sq_distance_to_uniform(p) - r2;
  if (std::abs(residual) > kChi2Residual)
    throw SolverError("chi2 solver: constraint residual " + std::to_string(residual) + " at lambda " +
                      std::to_string(hi) + " exceeds tolerance");
  return {weighted_sum(p, l), std::move(p)};
}

LossVector drrho_shift(const LossVector& target, const LossVector& reference) {
  if (target.size() != reference.size()) throw ArgumentError("target and reference loss lengths differ");
  std::vector<double> out(target.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = target[i] - reference[i];
  return out;
}

double evaluate_risk(const LossVector& losses, const RiskSpec& spec) {
  const std::size_t n = spec.n == 0 ? losses.size() : spec.n;
  switch (spec.kind) {
    case RiskKind::chi2_constrained:
      return chi2_dro_risk(losses, spec.rho, n).risk;
    case RiskKind::cvar_topk:
      return cvar_topk(losses, spec.k);
    case RiskKind::kl_constrained:
      return kl_constrained_risk(losses, spec.rho, n).risk;
    case RiskKind::kl_regularized:
      return kl_regularized_risk(losses, spec.tau);
  }
  throw ArgumentError("unknown risk kind");
}

}  // namespace drrho
