#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "drrho/matrix.hpp"

namespace drrho {

enum class Modality { image, text };

/// Two linear towers with unit-normalized outputs plus a temperature.
struct TwoTowerModel {
  Matrix w1;  // d x d_x
  Matrix w2;  // d x d_y
  double tau = 0.01;

  std::size_t dim() const { return w1.rows(); }
  std::size_t d_x() const { return w1.cols(); }
  std::size_t d_y() const { return w2.cols(); }
  std::size_t parameter_count() const { return w1.size() + w2.size(); }

  /// FNV-1a hash of the serialized parameters, as 16 hex digits.
  std::string id_hash() const;

  friend bool operator==(const TwoTowerModel&, const TwoTowerModel&) = default;
};

/// Entries i.i.d. normal with standard deviation 1/sqrt(fan_in).
TwoTowerModel init_model(std::size_t d, std::size_t d_x, std::size_t d_y, double tau, std::uint64_t seed);

/// Cosine similarities for a batch: rows index the first modality.
struct SimilarityMatrix {
  Matrix values;

  std::size_t size() const { return values.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return values(i, j); }
  double& operator()(std::size_t i, std::size_t j) { return values(i, j); }
  bool square() const { return values.rows() == values.cols(); }
};

/// W raw / |W raw| for a single input. Throws DegenerateEmbeddingError.
std::vector<double> embed(const TwoTowerModel& model, Modality modality, std::span<const double> raw);

/// Row-wise embedding of a batch of raw inputs.
Matrix embed_rows(const TwoTowerModel& model, Modality modality, const Matrix& raw);

SimilarityMatrix similarity_from_embeddings(const Matrix& e1, const Matrix& e2);
SimilarityMatrix similarity_batch(const TwoTowerModel& model, const Matrix& xs, const Matrix& ys);

struct TowerGradients {
  Matrix w1;
  Matrix w2;
};

/// Gradient of s(x, y) with respect to both towers.
TowerGradients similarity_grad(const TwoTowerModel& model, std::span<const double> x, std::span<const double> y);

/// Forward pass over a batch that keeps what the backward pass needs.
/// Holds references to `xs` and `ys`; they must outlive the object.
class BatchForward {
 public:
  BatchForward(const TwoTowerModel& model, const Matrix& xs, const Matrix& ys);

  const SimilarityMatrix& similarity() const { return sim_; }
  const Matrix& image_embeddings() const { return e1_; }
  const Matrix& text_embeddings() const { return e2_; }

  /// Parameter gradient of sum_ij grad_s(i, j) * s(i, j).
  TowerGradients backward(const Matrix& grad_s) const;

 private:
  const Matrix& xs_;
  const Matrix& ys_;
  Matrix e1_, e2_;
  std::vector<double> norms1_, norms2_;
  SimilarityMatrix sim_;
};

void save_model(const TwoTowerModel& model, const std::filesystem::path& path);
TwoTowerModel load_model(const std::filesystem::path& path);

}  // namespace drrho
