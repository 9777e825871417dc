#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "drrho/data.hpp"
#include "drrho/error.hpp"
#include "drrho/io.hpp"
#include "oracles.hpp"

using namespace drrho;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path = fs::temp_directory_path() / "drrho_test_data";
  TempDir() { fs::create_directories(path); }
  ~TempDir() { fs::remove_all(path); }
};

SyntheticParams params(std::size_t n, double sigma, std::uint64_t seed = 1) { return {n, 6, 5, 4, sigma, 0.25, seed}; }

}  // namespace

TEST_CASE("generation is a pure function of its parameters") {
  const auto a = generate_synthetic(params(40, 0.3));
  const auto b = generate_synthetic(params(40, 0.3));
  const auto c = generate_synthetic(params(40, 0.3, 2));
  CHECK(a.xs == b.xs);
  CHECK(a.ys == b.ys);
  CHECK(a.checksum() == b.checksum());
  CHECK_FALSE(a.xs == c.xs);
  CHECK(a.size() == 40);
  CHECK(a.d_x() == 6);
  CHECK(a.d_y() == 5);
}

TEST_CASE("suffix split and nested subsets") {
  const auto d = generate_synthetic({10, 6, 5, 4, 0.1, 0.25, 3});
  const auto test = d.test_indices();
  REQUIRE(test.size() == 3);
  CHECK(test.front() == 7);
  CHECK(test.back() == 9);
  const auto train = d.train_indices();
  CHECK(train.size() == 7);
  const auto half = d.train_subset(0.5);
  const auto most = d.train_subset(0.75);
  CHECK(half.size() == 4);
  CHECK(most.size() == 6);
  for (std::size_t k = 0; k < half.size(); ++k) CHECK(half[k] == most[k]);
  CHECK(d.train_subset(1.0) == train);
  CHECK_THROWS_AS(d.train_subset(0.0), ConfigError);
  CHECK_THROWS_AS(d.train_subset(1.5), ConfigError);
}

TEST_CASE("generation rejects invalid parameters") {
  CHECK_THROWS_AS(generate_synthetic({1, 6, 5, 4, 0.1, 0.2, 1}), ConfigError);
  CHECK_THROWS_AS(generate_synthetic({10, 6, 5, 6, 0.1, 0.2, 1}), ConfigError);
  CHECK_THROWS_AS(generate_synthetic({10, 6, 5, 4, -0.1, 0.2, 1}), ConfigError);
  CHECK_THROWS_AS(generate_synthetic({10, 6, 5, 4, 0.1, 1.2, 1}), ConfigError);
}

TEST_CASE("noise-free pairs share their latent and the true projections rank partners first") {
  const auto p = SyntheticParams{8, 6, 5, 4, 0.0, 0.0, 21};
  const auto d = generate_synthetic(p);
  const auto proj = synthetic_projections(p);
  // Latents recovered from x through A and from y through B by least squares.
  std::vector<std::vector<long double>> zx, zy;
  for (std::size_t i = 0; i < 8; ++i) {
    zx.push_back(oracle::least_squares(proj.a, d.xs.row(i)));
    zy.push_back(oracle::least_squares(proj.b, d.ys.row(i)));
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(std::abs(static_cast<double>(zx[i][k]) - d.latents(i, k)) <= 1e-9);
      CHECK(std::abs(static_cast<double>(zy[i][k]) - d.latents(i, k)) <= 1e-9);
    }
  }
  const auto cosine = [](const std::vector<long double>& a, const std::vector<long double>& b) {
    long double ab = 0, aa = 0, bb = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      ab += a[k] * b[k];
      aa += a[k] * a[k];
      bb += b[k] * b[k];
    }
    return ab / std::sqrt(aa * bb);
  };
  for (std::size_t i = 0; i < 8; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < 8; ++j)
      if (cosine(zx[i], zy[j]) > cosine(zx[i], zy[best])) best = j;
    CHECK(best == i);
  }
}

TEST_CASE("reference cache") {
  const auto d = generate_synthetic(params(20, 0.2));
  const auto m = init_model(3, 6, 5, 0.1, 4);
  const auto cache = build_reference_cache(d, m);
  CHECK(cache.size() == 20);
  CHECK(cache.dim() == 3);
  CHECK(cache.source_id == m.id_hash());
  CHECK(cache.dataset_checksum == d.checksum());
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(std::abs(dot(cache.e1.row(i), cache.e1.row(i)) - 1.0) <= 1e-9);
    CHECK(std::abs(dot(cache.e2.row(i), cache.e2.row(i)) - 1.0) <= 1e-9);
  }
  const std::vector<std::size_t> rows{3, 0, 17, 9};
  const auto cached = cached_similarity(cache, rows);
  const auto direct = similarity_batch(m, gather_rows(d.xs, rows), gather_rows(d.ys, rows));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(cached(i, j) - direct(i, j)) <= 1e-12);
  CHECK_THROWS_AS(build_reference_cache(d, init_model(3, 7, 5, 0.1, 4)), ConfigError);
  TwoTowerModel zero{Matrix(3, 6), Matrix(3, 5), 0.1};
  CHECK_THROWS_AS(build_reference_cache(d, zero), DegenerateEmbeddingError);
}

TEST_CASE("dataset and cache files round-trip and reject corruption") {
  TempDir t;
  const auto d = generate_synthetic(params(30, 0.4));
  save_dataset(d, t.path / "d.dpd");
  const auto back = load_dataset(t.path / "d.dpd");
  CHECK(back.xs == d.xs);
  CHECK(back.ys == d.ys);
  CHECK(back.latents == d.latents);
  CHECK(back.split == d.split);
  CHECK(back.checksum() == d.checksum());

  const auto cache = build_reference_cache(d, init_model(4, 6, 5, 0.1, 1));
  save_cache(cache, t.path / "c.emb");
  CHECK(load_cache(t.path / "c.emb") == cache);

  SUBCASE("manifest n disagrees") {
    const auto mp = io::manifest_path(t.path / "d.dpd");
    nlohmann::json j;
    std::ifstream(mp) >> j;
    j["n"] = 31;
    std::ofstream(mp, std::ios::trunc) << j.dump();
    CHECK_THROWS_AS(load_dataset(t.path / "d.dpd"), FormatError);
  }
  SUBCASE("payload byte flipped") {
    std::fstream f(t.path / "c.emb", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(-5, std::ios::end);
    f.put('\x7f');
    f.close();
    CHECK_THROWS_AS(load_cache(t.path / "c.emb"), ChecksumError);
  }
  SUBCASE("wrong file kind") { CHECK_THROWS_AS(load_cache(t.path / "d.dpd"), FormatError); }
}

TEST_CASE("gather_rows") {
  Matrix m(3, 2);
  for (std::size_t k = 0; k < 6; ++k) m.data()[k] = static_cast<double>(k);
  const auto g = gather_rows(m, {2, 0, 2});
  CHECK(g(0, 1) == 5.0);
  CHECK(g(1, 0) == 0.0);
  CHECK(g(2, 0) == 4.0);
  CHECK_THROWS_AS(gather_rows(m, {3}), ArgumentError);
}
