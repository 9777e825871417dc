#pragma once

#include <cstddef>
#include <vector>

#include "drrho/encoder.hpp"
#include "drrho/risk.hpp"

namespace drrho {

/// Which side of the pair is the anchor: an image (row i, negatives are texts
/// y_j) or a text (column i, negatives are images x_j).
enum class Direction { image_side, text_side };

/// Averaging set of an anchor loss. `full_set` averages over all n columns,
/// including j = i whose gap is zero; `batch_excluding_self` drops j = i, as
/// the mini-batch estimator does.
enum class AveragingSet { full_set, batch_excluding_self };

struct AnchorLossBundle {
  std::size_t anchor_index = 0;
  Direction direction = Direction::image_side;
  LossVector losses;  // one entry per j != i, in increasing j
  double value = 0.0;
};

/// s(i, j) - s(i, i) for image anchors, s(j, i) - s(i, i) for text anchors.
double pairwise_loss(const SimilarityMatrix& s, std::size_t i, std::size_t j,
                     Direction direction = Direction::image_side);

/// Target pairwise loss minus reference pairwise loss.
double rho_pairwise_loss(const SimilarityMatrix& target, const SimilarityMatrix& reference, std::size_t i,
                         std::size_t j, Direction direction);

/// tau * log(mean_j exp(l_hat(i, j) / tau)).
AnchorLossBundle drrho_anchor_loss(const SimilarityMatrix& target, const SimilarityMatrix& reference, std::size_t i,
                                   Direction direction, double tau, AveragingSet over);

/// The same aggregation over plain pairwise losses (no reference).
AnchorLossBundle gcl_anchor_loss(const SimilarityMatrix& target, std::size_t i, Direction direction, double tau,
                                 AveragingSet over);

/// Anchor loss values for every i on one side. Anchors are evaluated in
/// parallel; each value uses a fixed summation order. `reference` may be null.
std::vector<double> anchor_losses(const SimilarityMatrix& target, const SimilarityMatrix* reference,
                                  Direction direction, double tau, AveragingSet over);

/// (1/n) sum_i [F(x_i) + F(y_i)]; DRRho when `reference` is given, GCL otherwise.
double global_objective(const SimilarityMatrix& target, const SimilarityMatrix* reference, double tau,
                        AveragingSet over = AveragingSet::batch_excluding_self);

}  // namespace drrho
