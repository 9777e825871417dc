#include "drrho/contrastive.hpp"

#include "drrho/error.hpp"

namespace drrho {
namespace {

void check_index(const SimilarityMatrix& s, std::size_t i, std::size_t j) {
  if (!s.square()) throw ArgumentError("similarity matrix must be square");
  if (i >= s.size() || j >= s.size()) throw ArgumentError("similarity index out of range");
}

void check_pair(const SimilarityMatrix& target, const SimilarityMatrix* reference) {
  if (!target.square()) throw ArgumentError("similarity matrix must be square");
  if (reference && (reference->values.rows() != target.values.rows() ||
                    reference->values.cols() != target.values.cols()))
    throw ArgumentError("target and reference similarity shapes differ");
}

double gap(const SimilarityMatrix& s, std::size_t i, std::size_t j, Direction direction) {
  return (direction == Direction::image_side ? s(i, j) : s(j, i)) - s(i, i);
}

// Fills `scaled` with l(i, j) / tau for j != i and returns tau * log(mean)
// over the chosen averaging set. Full-set mode adds the zero j = i term.
double anchor_value(const SimilarityMatrix& target, const SimilarityMatrix* reference, std::size_t i,
                    Direction direction, double tau, AveragingSet over, std::vector<double>& losses,
                    std::vector<double>& scaled) {
  const std::size_t n = target.size();
  losses.clear();
  scaled.clear();
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) continue;
    double l = gap(target, i, j, direction);
    if (reference) l -= gap(*reference, i, j, direction);
    losses.push_back(l);
    scaled.push_back(l / tau);
  }
  if (over == AveragingSet::full_set) {
    // The j = i gap is identically zero for target and reference alike.
    scaled.push_back(0.0);
  }
  if (scaled.empty()) throw ArgumentError("anchor has an empty negative set");
  return tau * log_mean_exp(scaled);
}

AnchorLossBundle bundle(const SimilarityMatrix& target, const SimilarityMatrix* reference, std::size_t i,
                        Direction direction, double tau, AveragingSet over) {
  if (!(tau > 0.0)) throw ArgumentError("tau must be positive");
  check_pair(target, reference);
  check_index(target, i, i);
  std::vector<double> losses, scaled;
  const double v = anchor_value(target, reference, i, direction, tau, over, losses, scaled);
  return {i, direction, LossVector(std::move(losses)), v};
}

}  // namespace

double pairwise_loss(const SimilarityMatrix& s, std::size_t i, std::size_t j, Direction direction) {
  check_index(s, i, j);
  return gap(s, i, j, direction);
}

double rho_pairwise_loss(const SimilarityMatrix& target, const SimilarityMatrix& reference, std::size_t i,
                         std::size_t j, Direction direction) {
  check_pair(target, &reference);
  check_index(target, i, j);
  return gap(target, i, j, direction) - gap(reference, i, j, direction);
}

AnchorLossBundle drrho_anchor_loss(const SimilarityMatrix& target, const SimilarityMatrix& reference, std::size_t i,
                                   Direction direction, double tau, AveragingSet over) {
  return bundle(target, &reference, i, direction, tau, over);
}

AnchorLossBundle gcl_anchor_loss(const SimilarityMatrix& target, std::size_t i, Direction direction, double tau,
                                 AveragingSet over) {
  return bundle(target, nullptr, i, direction, tau, over);
}

std::vector<double> anchor_losses(const SimilarityMatrix& target, const SimilarityMatrix* reference,
                                  Direction direction, double tau, AveragingSet over) {
  if (!(tau > 0.0)) throw ArgumentError("tau must be positive");
  check_pair(target, reference);
  const auto n = static_cast<long>(target.size());
  if (n == 0) throw ArgumentError("empty similarity matrix");
  if (n == 1 && over == AveragingSet::batch_excluding_self) throw ArgumentError("anchor has an empty negative set");
  std::vector<double> values(target.size());
#pragma omp parallel
  {
    std::vector<double> losses, scaled;
#pragma omp for schedule(static)
    for (long i = 0; i < n; ++i) {
      const auto u = static_cast<std::size_t>(i);
      values[u] = anchor_value(target, reference, u, direction, tau, over, losses, scaled);
    }
  }
  return values;
}

double global_objective(const SimilarityMatrix& target, const SimilarityMatrix* reference, double tau,
                        AveragingSet over) {
  const auto img = anchor_losses(target, reference, Direction::image_side, tau, over);
  const auto txt = anchor_losses(target, reference, Direction::text_side, tau, over);
  double s = 0.0;
  for (std::size_t i = 0; i < img.size(); ++i) s += img[i] + txt[i];
  return s / static_cast<double>(img.size());
}

}  // namespace drrho
