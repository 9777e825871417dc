#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "drrho/data.hpp"
#include "drrho/encoder.hpp"
#include "drrho/optim.hpp"
#include "drrho/report.hpp"

namespace drrho {

enum class Method { openclip, fastclip, drrho_clip, jest, jest_topk };

std::string to_string(Method m);
/// Throws ArgumentError for unknown names.
Method parse_method(const std::string& name);

bool uses_reference(Method m);

struct TrainerConfig {
  Method method = Method::drrho_clip;

  // Model and schedule.
  std::size_t embed_dim = 8;
  std::size_t batch_size = 64;
  std::size_t iterations = 1000;
  double lr = 1e-2;
  std::size_t warmup_steps = 0;
  AdamWConfig adamw{};
  std::uint64_t seed = 0;
  double data_fraction = 1.0;

  // Temperature. Unset values get per-method defaults from resolve().
  std::optional<bool> tau_learnable;
  double tau = 0.01;       // fixed-temperature value
  double tau_init = 0.07;  // learnable-temperature start
  double tau_lr_scale = 0.25;
  double tau_min = 0.005;
  double rho = 11.0;

  // Moving-average estimators.
  double gamma = 0.8;
  double epsilon = 1e-8;

  // Distillation.
  bool distill = false;
  double lambda = 0.25;
  double tau_ref = 0.01;  // teacher temperature

  // JEST.
  double selection_ratio = 0.2;
  std::size_t n_chunks = 2;
  double jest_temperature = 1.0;
  double jest_iteration_multiplier = 1.87;

  // Evaluation cadence; 0 means max(1, T / 50).
  std::size_t eval_every = 0;
  // Training rows (a prefix) used for the recorded objective; 0 means all.
  std::size_t objective_rows = 1024;

  /// Fills method-dependent defaults and validates every field.
  /// Throws ConfigError naming the offending field.
  TrainerConfig resolve() const;

  bool learnable() const { return tau_learnable.value_or(false); }
  double initial_tau() const { return learnable() ? tau_init : tau; }
  std::size_t effective_iterations() const;
  std::size_t eval_interval() const;

  nlohmann::json to_json() const;
  static TrainerConfig from_json(const nlohmann::json& j);
};

/// Parameters, estimator sequences and optimizer accumulators of one run.
///
/// The estimators u1, u2 are stored as logarithms because exp(l_hat / tau)
/// overflows a double for gaps above ~3.5 at tau = 0.005. A value of -inf
/// marks an index that has never been updated.
struct TrainerState {
  TwoTowerModel model;
  std::vector<double> log_u1;
  std::vector<double> log_u2;
  std::size_t step = 0;
  AdamW opt_w1, opt_w2, opt_tau;

  /// Step at which u was last refreshed; gradient estimation requires it to
  /// equal `step`.
  std::size_t u_step = std::numeric_limits<std::size_t>::max();

  double u1(std::size_t i) const;
  double u2(std::size_t i) const;

  friend bool operator==(const TrainerState&, const TrainerState&) = default;
};

TrainerState init_state(const TrainerConfig& config, std::size_t n, std::size_t d_x, std::size_t d_y);

/// u_{k,i} <- (1 - gamma) u_{k,i} + gamma * mean_{j != i} exp(l_hat_k(i, j) / tau)
/// for batch members; untouched indices take gamma = 1 on first update.
/// `batch` holds dataset indices aligned with the rows of the matrices;
/// `reference` may be null (plain pairwise losses).
void update_u(TrainerState& state, const TrainerConfig& config, std::span<const std::size_t> batch,
              const SimilarityMatrix& target, const SimilarityMatrix* reference);

/// Gradient estimator G1 + G2 expressed as dG/ds: the returned b x b matrix
/// is back-propagated through the encoders by BatchForward::backward.
Matrix gradient_estimator(const TrainerState& state, const TrainerConfig& config,
                          std::span<const std::size_t> batch, const SimilarityMatrix& target,
                          const SimilarityMatrix* reference);

/// Estimator gradient with respect to the tower parameters.
TowerGradients gradient_estimator(const TrainerState& state, const TrainerConfig& config,
                                  std::span<const std::size_t> batch, const BatchForward& forward,
                                  const SimilarityMatrix* reference);

/// d/dtau of the learnable-temperature objective, using the current u.
double tau_gradient(const TrainerState& state, const TrainerConfig& config, std::span<const std::size_t> batch,
                    const SimilarityMatrix& target, const SimilarityMatrix* reference);

/// Decoupled-weight-decay Adam step on both towers at the scheduled rate,
/// plus a temperature step (lr * tau_lr_scale, no decay, clamped at tau_min)
/// when `tau_grad` is given. Throws TrainingAborted on non-finite gradients.
void optimizer_step(TrainerState& state, const TrainerConfig& config, const TowerGradients& grad,
                    std::optional<double> tau_grad = std::nullopt);

double learning_rate(const TrainerConfig& config, std::size_t step);

/// Epoch-wise shuffling without replacement; each epoch's permutation is a
/// pure function of (seed, epoch). Batches never straddle epochs.
class EpochSampler {
 public:
  EpochSampler(std::vector<std::size_t> pool, std::uint64_t seed);
  std::vector<std::size_t> next(std::size_t count);

 private:
  void start_epoch();

  std::vector<std::size_t> pool_;
  std::vector<std::size_t> order_;
  std::uint64_t seed_;
  std::size_t epoch_ = 0;
  std::size_t cursor_ = 0;
};

struct TrainResult {
  TrainerState state;
  ExperimentReport report;
};

/// Runs the configured method. `cache` is required for methods that use a
/// reference model and for distillation.
TrainResult train(const TrainerConfig& config, const PairedDataset& data, const EmbeddingCache* cache);

/// Exact objective of the method on the given rows: DRRho with a cache, GCL
/// otherwise, batch-excluding-i averaging, at the model's temperature.
double exact_objective(const TwoTowerModel& model, const PairedDataset& data, const EmbeddingCache* cache,
                       const std::vector<std::size_t>& rows);

void save_checkpoint(const TrainerState& state, const std::filesystem::path& path);
TrainerState load_checkpoint(const std::filesystem::path& path, const AdamWConfig& adamw);

}  // namespace drrho
