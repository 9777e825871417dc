#include "drrho/optim.hpp"

#include <cmath>
#include <numbers>

#include "drrho/error.hpp"

namespace drrho {

void AdamW::step(std::span<double> params, std::span<const double> grad, double lr) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw ArgumentError("gradient shape does not match parameters");
  ++t_;
  const auto& c = config_;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t_));
  const double decay = 1.0 - lr * c.weight_decay;
  for (std::size_t k = 0; k < params.size(); ++k) {
    m_[k] = c.beta1 * m_[k] + (1.0 - c.beta1) * grad[k];
    v_[k] = c.beta2 * v_[k] + (1.0 - c.beta2) * grad[k] * grad[k];
    const double m_hat = m_[k] / bc1;
    const double v_hat = v_[k] / bc2;
    params[k] = params[k] * decay - lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
}

void AdamW::restore(std::vector<double> m, std::vector<double> v, std::size_t t) {
  if (m.size() != m_.size() || v.size() != v_.size()) throw ArgumentError("moment shapes do not match");
  m_ = std::move(m);
  v_ = std::move(v);
  t_ = t;
}

double LrSchedule::at(std::size_t step) const {
  if (step < warmup_steps) return base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
  if (total_steps <= warmup_steps) return base_lr;
  const double progress =
      static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
  return 0.5 * base_lr * (1.0 + std::cos(std::numbers::pi * std::min(progress, 1.0)));
}

}  // namespace drrho
