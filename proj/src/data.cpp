#include "drrho/data.hpp"

#include <cmath>

#include "drrho/error.hpp"
#include "drrho/io.hpp"
#include "drrho/rng.hpp"

namespace drrho {
namespace {

void validate(const SyntheticParams& p) {
  if (p.n < 2) throw ConfigError("n must be at least 2");
  if (p.d_x == 0 || p.d_y == 0 || p.d_latent == 0) throw ConfigError("dimensions must be positive");
  if (p.d_latent > std::min(p.d_x, p.d_y)) throw ConfigError("d_latent must not exceed min(d_x, d_y)");
  if (!(p.noise_sigma >= 0.0) || !std::isfinite(p.noise_sigma)) throw ConfigError("noise_sigma must be >= 0");
  if (!(p.test_fraction >= 0.0 && p.test_fraction <= 1.0)) throw ConfigError("test_fraction must be in [0, 1]");
}

std::size_t test_count(const SyntheticParams& p) {
  return static_cast<std::size_t>(std::ceil(p.test_fraction * static_cast<double>(p.n)));
}

SyntheticProjections draw_projections(Rng& rng, const SyntheticParams& p) {
  SyntheticProjections proj{Matrix(p.d_x, p.d_latent), Matrix(p.d_y, p.d_latent)};
  const double scale = 1.0 / std::sqrt(static_cast<double>(p.d_latent));
  for (double& v : proj.a.flat()) v = scale * rng.normal();
  for (double& v : proj.b.flat()) v = scale * rng.normal();
  return proj;
}

io::Container dataset_container(const PairedDataset& data) {
  Matrix split(data.size(), 1);
  for (std::size_t i = 0; i < data.size(); ++i) split(i, 0) = static_cast<double>(data.split[i]);
  io::Container c;
  c.kind = io::Kind::dataset;
  c.arrays = {data.xs, data.ys, data.latents, split};
  const auto& p = data.params;
  c.manifest = {{"n", p.n},           {"d_x", p.d_x},
                {"d_y", p.d_y},       {"d_latent", p.d_latent},
                {"noise_sigma", p.noise_sigma}, {"test_fraction", p.test_fraction},
                {"seed", p.seed}};
  return c;
}

}  // namespace

std::vector<std::size_t> PairedDataset::train_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i)
    if (split[i] == Split::train) out.push_back(i);
  return out;
}

std::vector<std::size_t> PairedDataset::test_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i)
    if (split[i] == Split::test) out.push_back(i);
  return out;
}

std::vector<std::size_t> PairedDataset::train_subset(double fraction) const {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("fraction must be in (0, 1]");
  auto idx = train_indices();
  const auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(idx.size())));
  idx.resize(std::min(keep, idx.size()));
  return idx;
}

std::string PairedDataset::checksum() const { return io::to_hex(io::fnv1a64(io::encode(dataset_container(*this)))); }

SyntheticProjections synthetic_projections(const SyntheticParams& p) {
  validate(p);
  Rng rng(p.seed);
  return draw_projections(rng, p);
}

PairedDataset generate_synthetic(const SyntheticParams& p) {
  validate(p);
  // Projections are drawn first from the stream, so synthetic_projections()
  // reproduces the matrices used here.
  Rng rng(p.seed);
  const auto proj = draw_projections(rng, p);

  PairedDataset data{p, Matrix(p.n, p.d_x), Matrix(p.n, p.d_y), Matrix(p.n, p.d_latent), {}};
  for (std::size_t i = 0; i < p.n; ++i) {
    auto z = data.latents.row(i);
    for (double& v : z) v = rng.normal();
    for (std::size_t r = 0; r < p.d_x; ++r) data.xs(i, r) = dot(proj.a.row(r), z) + p.noise_sigma * rng.normal();
    for (std::size_t r = 0; r < p.d_y; ++r) data.ys(i, r) = dot(proj.b.row(r), z) + p.noise_sigma * rng.normal();
  }
  const std::size_t n_test = test_count(p);
  data.split.assign(p.n, Split::train);
  for (std::size_t i = p.n - n_test; i < p.n; ++i) data.split[i] = Split::test;
  return data;
}

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& indices) {
  Matrix out(indices.size(), m.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= m.rows()) throw ArgumentError("row index out of range");
    std::copy(m.row(indices[r]).begin(), m.row(indices[r]).end(), out.row(r).begin());
  }
  return out;
}

EmbeddingCache build_reference_cache(const PairedDataset& data, const TwoTowerModel& reference) {
  if (reference.d_x() != data.d_x() || reference.d_y() != data.d_y())
    throw ConfigError("reference encoder dimensions do not match the dataset");
  return {embed_rows(reference, Modality::image, data.xs), embed_rows(reference, Modality::text, data.ys),
          reference.id_hash(), data.checksum()};
}

SimilarityMatrix cached_similarity(const EmbeddingCache& cache, const std::vector<std::size_t>& rows) {
  return similarity_from_embeddings(gather_rows(cache.e1, rows), gather_rows(cache.e2, rows));
}

void save_dataset(const PairedDataset& data, const std::filesystem::path& path) {
  auto c = dataset_container(data);
  c.manifest["n_test"] = test_count(data.params);
  io::write_container(path, c);
}

PairedDataset load_dataset(const std::filesystem::path& path) {
  auto c = io::read_container(path, io::Kind::dataset);
  if (c.arrays.size() != 4) throw FormatError(path.string() + ": expected 4 arrays");
  PairedDataset data;
  try {
    auto& m = c.manifest;
    data.params = {m.at("n").get<std::size_t>(),           m.at("d_x").get<std::size_t>(),
                   m.at("d_y").get<std::size_t>(),         m.at("d_latent").get<std::size_t>(),
                   m.at("noise_sigma").get<double>(),      m.at("test_fraction").get<double>(),
                   m.at("seed").get<std::uint64_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": manifest field missing: " + e.what());
  }
  const auto& p = data.params;
  const auto& a = c.arrays;
  if (a[0].rows() != p.n || a[1].rows() != p.n || a[2].rows() != p.n || a[3].rows() != p.n)
    throw FormatError(path.string() + ": manifest n disagrees with payload length");
  if (a[0].cols() != p.d_x || a[1].cols() != p.d_y || a[2].cols() != p.d_latent || a[3].cols() != 1)
    throw FormatError(path.string() + ": manifest dims disagree with payload");
  data.xs = std::move(c.arrays[0]);
  data.ys = std::move(c.arrays[1]);
  data.latents = std::move(c.arrays[2]);
  data.split.resize(p.n);
  for (std::size_t i = 0; i < p.n; ++i) {
    const double s = c.arrays[3](i, 0);
    if (s != 0.0 && s != 1.0) throw FormatError(path.string() + ": bad split label");
    data.split[i] = s == 0.0 ? Split::train : Split::test;
  }
  return data;
}

void save_cache(const EmbeddingCache& cache, const std::filesystem::path& path) {
  io::Container c;
  c.kind = io::Kind::embedding_cache;
  c.arrays = {cache.e1, cache.e2};
  c.manifest = {{"n", cache.size()},
                {"d", cache.dim()},
                {"source_id", cache.source_id},
                {"dataset_checksum", cache.dataset_checksum}};
  io::write_container(path, c);
}

EmbeddingCache load_cache(const std::filesystem::path& path) {
  auto c = io::read_container(path, io::Kind::embedding_cache);
  if (c.arrays.size() != 2) throw FormatError(path.string() + ": expected 2 arrays");
  EmbeddingCache cache;
  std::size_t n = 0, d = 0;
  try {
    n = c.manifest.at("n").get<std::size_t>();
    d = c.manifest.at("d").get<std::size_t>();
    cache.source_id = c.manifest.at("source_id").get<std::string>();
    cache.dataset_checksum = c.manifest.at("dataset_checksum").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": manifest field missing: " + e.what());
  }
  for (const auto& m : c.arrays)
    if (m.rows() != n || m.cols() != d) throw FormatError(path.string() + ": manifest n/d disagree with payload");
  cache.e1 = std::move(c.arrays[0]);
  cache.e2 = std::move(c.arrays[1]);
  return cache;
}

}  // namespace drrho
