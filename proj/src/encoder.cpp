#include "drrho/encoder.hpp"

#include <cmath>

#include "drrho/error.hpp"
#include "drrho/io.hpp"
#include "drrho/kernels.hpp"
#include "drrho/rng.hpp"

namespace drrho {
namespace {

const Matrix& tower(const TwoTowerModel& model, Modality modality) {
  return modality == Modality::image ? model.w1 : model.w2;
}

[[noreturn]] void degenerate(long row) {
  throw DegenerateEmbeddingError("embedding norm below 1e-12 at row " + std::to_string(row));
}

io::Container model_container(const TwoTowerModel& model) {
  io::Container c;
  c.kind = io::Kind::model;
  c.arrays = {model.w1, model.w2, Matrix(1, 1, model.tau)};
  return c;
}

}  // namespace

std::string TwoTowerModel::id_hash() const { return io::to_hex(io::fnv1a64(io::encode(model_container(*this)))); }

TwoTowerModel init_model(std::size_t d, std::size_t d_x, std::size_t d_y, double tau, std::uint64_t seed) {
  if (d == 0 || d_x == 0 || d_y == 0) throw ConfigError("model dimensions must be positive");
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  Rng rng(seed);
  TwoTowerModel m{Matrix(d, d_x), Matrix(d, d_y), tau};
  const double s1 = 1.0 / std::sqrt(static_cast<double>(d_x));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(d_y));
  for (double& v : m.w1.flat()) v = s1 * rng.normal();
  for (double& v : m.w2.flat()) v = s2 * rng.normal();
  return m;
}

std::vector<double> embed(const TwoTowerModel& model, Modality modality, std::span<const double> raw) {
  const Matrix& w = tower(model, modality);
  if (raw.size() != w.cols()) throw ConfigError("raw input dimension does not match encoder");
  Matrix in(1, raw.size());
  std::copy(raw.begin(), raw.end(), in.row(0).begin());
  Matrix out;
  std::vector<double> norms;
  if (kernels::serial::embed(w, in, out, norms) >= 0) degenerate(0);
  return {out.row(0).begin(), out.row(0).end()};
}

Matrix embed_rows(const TwoTowerModel& model, Modality modality, const Matrix& raw) {
  const Matrix& w = tower(model, modality);
  if (raw.cols() != w.cols()) throw ConfigError("raw input dimension does not match encoder");
  Matrix out;
  std::vector<double> norms;
  if (const long bad = kernels::active().embed(w, raw, out, norms); bad >= 0) degenerate(bad);
  return out;
}

SimilarityMatrix similarity_from_embeddings(const Matrix& e1, const Matrix& e2) {
  if (e1.cols() != e2.cols()) throw ConfigError("embedding dimensions differ");
  SimilarityMatrix s;
  kernels::active().gram(e1, e2, s.values);
  return s;
}

SimilarityMatrix similarity_batch(const TwoTowerModel& model, const Matrix& xs, const Matrix& ys) {
  if (xs.rows() != ys.rows()) throw ArgumentError("batch sizes differ");
  return similarity_from_embeddings(embed_rows(model, Modality::image, xs), embed_rows(model, Modality::text, ys));
}

TowerGradients similarity_grad(const TwoTowerModel& model, std::span<const double> x, std::span<const double> y) {
  Matrix xs(1, x.size()), ys(1, y.size());
  std::copy(x.begin(), x.end(), xs.row(0).begin());
  std::copy(y.begin(), y.end(), ys.row(0).begin());
  BatchForward fwd(model, xs, ys);
  return fwd.backward(Matrix(1, 1, 1.0));
}

BatchForward::BatchForward(const TwoTowerModel& model, const Matrix& xs, const Matrix& ys) : xs_(xs), ys_(ys) {
  if (xs.cols() != model.d_x() || ys.cols() != model.d_y())
    throw ConfigError("raw input dimension does not match encoder");
  const auto& k = kernels::active();
  if (const long bad = k.embed(model.w1, xs, e1_, norms1_); bad >= 0) degenerate(bad);
  if (const long bad = k.embed(model.w2, ys, e2_, norms2_); bad >= 0) degenerate(bad);
  k.gram(e1_, e2_, sim_.values);
}

TowerGradients BatchForward::backward(const Matrix& grad_s) const {
  if (grad_s.rows() != e1_.rows() || grad_s.cols() != e2_.rows())
    throw ArgumentError("similarity gradient shape does not match the batch");
  TowerGradients g;
  kernels::active().backward(grad_s, xs_, ys_, e1_, e2_, norms1_, norms2_, g.w1, g.w2);
  return g;
}

void save_model(const TwoTowerModel& model, const std::filesystem::path& path) {
  auto c = model_container(model);
  c.manifest = {{"id_hash", model.id_hash()}, {"d", model.dim()}, {"d_x", model.d_x()}, {"d_y", model.d_y()}};
  io::write_container(path, c);
}

TwoTowerModel load_model(const std::filesystem::path& path) {
  auto c = io::read_container(path, io::Kind::model);
  if (c.arrays.size() != 3 || c.arrays[2].size() != 1 || c.arrays[0].rows() != c.arrays[1].rows())
    throw FormatError(path.string() + ": malformed model container");
  TwoTowerModel m{std::move(c.arrays[0]), std::move(c.arrays[1]), c.arrays[2](0, 0)};
  if (c.manifest.value("id_hash", std::string{}) != m.id_hash())
    throw FormatError(path.string() + ": manifest id_hash disagrees with parameters");
  return m;
}

}  // namespace drrho
