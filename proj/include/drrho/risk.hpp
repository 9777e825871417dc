#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

// Distributionally robust risks over a vector of per-sample losses. Passing
// reference-shifted losses (drrho_shift) turns each of them into the
// corresponding DRRho risk.

namespace drrho {

/// Per-sample losses with optional known bounds [M0, M1].
class LossVector {
 public:
  LossVector() = default;
  LossVector(std::vector<double> values);  // NOLINT: implicit on purpose
  LossVector(std::vector<double> values, double lower, double upper);

  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  const std::optional<std::pair<double, double>>& bounds() const { return bounds_; }

  double mean() const;
  double max() const;
  double min() const;
  double range() const { return max() - min(); }

 private:
  std::vector<double> values_;
  std::optional<std::pair<double, double>> bounds_;
};

/// log((1/m) sum exp(x_i)), computed with the maximum subtracted.
double log_mean_exp(std::span<const double> x);

/// Mean of the k largest losses. Ordering is by value descending then index
/// ascending.
double cvar_topk(const LossVector& losses, std::size_t k);

/// p_i proportional to exp(l_i / tau), normalized to sum to one.
std::vector<double> softmax_weights(const LossVector& losses, double tau);

/// tau * log((1/m) sum exp(l_i / tau)).
double kl_regularized_risk(const LossVector& losses, double tau);

struct KlConstrainedResult {
  double risk = 0.0;
  double tau_star = 0.0;
};

/// Search interval for the dual temperature; both ends scale with the loss
/// range because the minimizer can sit on either boundary.
struct TauBounds {
  double lo;
  double hi;
};
TauBounds kl_tau_bounds(const LossVector& losses);

/// min over tau in [lo, hi] of tau * log((1/m) sum exp(l_i / tau)) + tau * rho / n.
/// The objective is convex in tau; solved by 80 rounds of ternary search on
/// log tau.
KlConstrainedResult kl_constrained_risk(const LossVector& losses, double rho, std::size_t n);

struct Chi2Result {
  double risk = 0.0;
  std::vector<double> weights;
};

/// sup sum p_i l_i over the simplex with (1/n) sum (n p_i - 1)^2 / 2 <= rho / n.
///
/// The constraint is the ball |p - 1/n| <= sqrt(2 rho) / n. For a multiplier
/// lambda the maximizer is the simplex projection of 1/n + l / lambda; lambda
/// is found by bisection on the ball residual and then polished in closed form
/// on the resulting support.
Chi2Result chi2_dro_risk(const LossVector& losses, double rho, std::size_t n);

/// Euclidean projection onto the probability simplex.
std::vector<double> project_to_simplex(std::span<const double> v);

/// l(theta, z_i) - l(theta_ref, z_i), elementwise.
LossVector drrho_shift(const LossVector& target, const LossVector& reference);

enum class RiskKind { chi2_constrained, cvar_topk, kl_constrained, kl_regularized };

struct RiskSpec {
  RiskKind kind = RiskKind::kl_regularized;
  double rho = 0.0;
  std::size_t k = 1;
  double tau = 1.0;
  std::size_t n = 0;  // radius denominator; 0 means "use the number of losses"
};

/// Dispatches on spec.kind after validating the fields that kind needs.
double evaluate_risk(const LossVector& losses, const RiskSpec& spec);

}  // namespace drrho
