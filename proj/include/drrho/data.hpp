#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "drrho/encoder.hpp"
#include "drrho/matrix.hpp"

namespace drrho {

enum class Split : std::uint8_t { train = 0, test = 1 };

struct SyntheticParams {
  std::size_t n = 0;
  std::size_t d_x = 0;
  std::size_t d_y = 0;
  std::size_t d_latent = 0;
  double noise_sigma = 0.0;
  double test_fraction = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const SyntheticParams&, const SyntheticParams&) = default;
};

/// Aligned (x, y) pairs generated from shared latent vectors.
struct PairedDataset {
  SyntheticParams params;
  Matrix xs;       // n x d_x
  Matrix ys;       // n x d_y
  Matrix latents;  // n x d_latent
  std::vector<Split> split;

  std::size_t size() const { return xs.rows(); }
  std::size_t d_x() const { return xs.cols(); }
  std::size_t d_y() const { return ys.cols(); }

  std::vector<std::size_t> train_indices() const;
  std::vector<std::size_t> test_indices() const;

  /// First ceil(fraction * n_train) training indices. Subsets for smaller
  /// fractions are prefixes of those for larger ones.
  std::vector<std::size_t> train_subset(double fraction) const;

  /// Content hash of the serialized dataset.
  std::string checksum() const;

  friend bool operator==(const PairedDataset&, const PairedDataset&) = default;
};

/// The fixed projections x = A z + noise, y = B z + noise used by the
/// generator for a given seed.
struct SyntheticProjections {
  Matrix a;  // d_x x d_latent
  Matrix b;  // d_y x d_latent
};

SyntheticProjections synthetic_projections(const SyntheticParams& p);

/// Latents are standard normal; A and B have entries N(0, 1/d_latent) so each
/// clean coordinate has unit variance; noise is N(0, noise_sigma^2). The last
/// ceil(test_fraction * n) indices form the test split.
PairedDataset generate_synthetic(const SyntheticParams& p);

/// Rows gathered from `m` in the order of `indices`.
Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& indices);

/// Reference-model embeddings for every pair, computed once.
struct EmbeddingCache {
  Matrix e1;  // n x d
  Matrix e2;  // n x d
  std::string source_id;
  std::string dataset_checksum;

  std::size_t size() const { return e1.rows(); }
  std::size_t dim() const { return e1.cols(); }

  friend bool operator==(const EmbeddingCache&, const EmbeddingCache&) = default;
};

EmbeddingCache build_reference_cache(const PairedDataset& data, const TwoTowerModel& reference);

/// Reference similarities between the given rows of the cache.
SimilarityMatrix cached_similarity(const EmbeddingCache& cache, const std::vector<std::size_t>& rows);

void save_dataset(const PairedDataset& data, const std::filesystem::path& path);
PairedDataset load_dataset(const std::filesystem::path& path);

void save_cache(const EmbeddingCache& cache, const std::filesystem::path& path);
EmbeddingCache load_cache(const std::filesystem::path& path);

}  // namespace drrho
