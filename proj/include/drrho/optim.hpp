#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace drrho {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-8;
  double weight_decay = 0.1;

  friend bool operator==(const AdamWConfig&, const AdamWConfig&) = default;
};

/// Adam with decoupled weight decay for one flat parameter block.
class AdamW {
 public:
  AdamW() = default;
  AdamW(std::size_t size, AdamWConfig config) : config_(config), m_(size, 0.0), v_(size, 0.0) {}

  /// params <- params * (1 - lr * wd) - lr * m_hat / (sqrt(v_hat) + eps).
  void step(std::span<double> params, std::span<const double> grad, double lr);

  std::size_t steps() const { return t_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }
  const AdamWConfig& config() const { return config_; }

  /// Restores accumulators, e.g. from a checkpoint.
  void restore(std::vector<double> m, std::vector<double> v, std::size_t t);

  friend bool operator==(const AdamW&, const AdamW&) = default;

 private:
  AdamWConfig config_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

/// Linear warmup to base_lr, then cosine decay to zero at total_steps.
struct LrSchedule {
  double base_lr = 1e-2;
  std::size_t warmup_steps = 0;
  std::size_t total_steps = 1;

  double at(std::size_t step) const;
};

}  // namespace drrho
