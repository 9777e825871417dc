#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "drrho/encoder.hpp"
#include "drrho/trainer.hpp"

namespace drrho {

/// A loss value with its gradients with respect to the similarity matrix and
/// the temperature.
struct SimilarityLoss {
  double value = 0.0;
  Matrix grad_s;
  double grad_tau = 0.0;
};

/// Symmetric mini-batch cross-entropy: average of the row-wise and
/// column-wise -log softmax(s / tau) at the diagonal.
double infonce_loss(const SimilarityMatrix& s, double tau);
SimilarityLoss infonce_loss_grad(const SimilarityMatrix& s, double tau);

/// Cross-entropy from reference soft targets (at tau_ref) to target
/// softmaxes (at tau), over rows and columns, divided by b^2.
double distillation_loss(const SimilarityMatrix& target, const SimilarityMatrix& reference, double tau,
                         double tau_ref);
SimilarityLoss distillation_loss_grad(const SimilarityMatrix& target, const SimilarityMatrix& reference, double tau,
                                      double tau_ref);

/// (1 - lambda) * con + lambda * dist, lambda in [0, 1].
double combined_objective(double con_loss, double dist_loss, double lambda);

/// Global contrastive loss step without a reference: the DRRho estimator with
/// plain pairwise losses. Updates u for the batch, then returns dG/ds.
Matrix gcl_trainer_step(TrainerState& state, const TrainerConfig& config, std::span<const std::size_t> batch,
                        const SimilarityMatrix& target);

enum class SelectionMode { sample, topk };

struct JestParams {
  double ratio = 0.2;
  std::size_t n_chunks = 2;
  SelectionMode mode = SelectionMode::sample;
  double temperature = 1.0;  // softmax temperature of the sampling scores
  double tau = 0.01;         // temperature inside the RHO scores
  std::uint64_t seed = 0;
};

struct ChunkTrace {
  std::vector<std::size_t> selected;  // dataset indices, in draw order
  std::vector<double> scores;         // score of each selected index
};

struct SelectionOutcome {
  std::vector<std::size_t> super_batch;
  std::vector<std::size_t> selected;
  std::vector<ChunkTrace> chunks;
  std::uint64_t seed = 0;
};

/// Number of pairs jest_select keeps: ceil(ratio * super_size).
std::size_t selection_size(double ratio, std::size_t super_size);

/// Staged selection from a super-batch. Chunk 1 is scored by the target's
/// positive-pair similarity; later chunks by F(x_i, B_sel) + F(y_i, B_sel)
/// computed with reference-shifted losses against everything selected so
/// far. The last chunk absorbs any remainder. Matrices are indexed by
/// position in `super_batch`; `reference` may be null only when n_chunks = 1.
SelectionOutcome jest_select(const SimilarityMatrix& target, const SimilarityMatrix* reference,
                             std::span<const std::size_t> super_batch, const JestParams& params);

}  // namespace drrho
