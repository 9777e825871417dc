#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include "drrho/error.hpp"
#include "drrho/trainer.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace drrho;
namespace fs = std::filesystem;

namespace {

PairedDataset small_data(std::uint64_t seed = 1) { return generate_synthetic({400, 8, 8, 4, 0.3, 0.2, seed}); }

TrainerConfig small_config(Method m) {
  TrainerConfig c;
  c.method = m;
  c.embed_dim = 4;
  c.batch_size = 16;
  c.iterations = 30;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("methods parse and print") {
  for (Method m : {Method::openclip, Method::fastclip, Method::drrho_clip, Method::jest, Method::jest_topk})
    CHECK(parse_method(to_string(m)) == m);
  CHECK_THROWS_AS(parse_method("bogus"), ArgumentError);
  CHECK(uses_reference(Method::drrho_clip));
  CHECK_FALSE(uses_reference(Method::fastclip));
}

TEST_CASE("config resolution fills per-method temperature defaults") {
  TrainerConfig c;
  c.method = Method::drrho_clip;
  auto r = c.resolve();
  CHECK_FALSE(r.learnable());
  CHECK(r.initial_tau() == 0.01);
  c.method = Method::fastclip;
  r = c.resolve();
  CHECK(r.learnable());
  CHECK(r.initial_tau() == 0.07);
  c.tau_learnable = false;
  CHECK_FALSE(c.resolve().learnable());
  c.method = Method::jest;
  c.iterations = 100;
  CHECK(c.resolve().effective_iterations() == 187);
  CHECK(c.resolve().eval_interval() == 3);
}

TEST_CASE("config validation names the field") {
  const auto message = [](TrainerConfig c) {
    try {
      c.resolve();
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  TrainerConfig c;
  c.gamma = 1.5;
  CHECK(message(c).rfind("gamma", 0) == 0);
  c = {};
  c.batch_size = 1;
  CHECK(message(c).rfind("batch_size", 0) == 0);
  c = {};
  c.lambda = -0.1;
  CHECK(message(c).rfind("lambda", 0) == 0);
  c = {};
  c.rho = -1;
  CHECK(message(c).rfind("rho", 0) == 0);
  c = {};
  c.selection_ratio = 0.0;
  CHECK(message(c).rfind("ratio", 0) == 0);
}

TEST_CASE("config JSON round trip") {
  TrainerConfig c = small_config(Method::jest_topk);
  c.lambda = 0.4;
  c.distill = true;
  c.tau_learnable = false;
  const auto back = TrainerConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.method == Method::jest_topk);
  CHECK_THROWS_AS(TrainerConfig::from_json({{"gamma", "high"}}), ConfigError);
}

TEST_CASE("u update: first touch, gamma extremes, and the moving average") {
  std::mt19937_64 gen(2);
  const auto s = oracle::random_similarity(gen, 4);
  const auto r = oracle::random_similarity(gen, 4);
  TrainerConfig cfg;
  cfg.gamma = 0.3;
  auto state = init_state(cfg, 10, 3, 3);
  state.model.tau = 0.2;
  const std::vector<std::size_t> batch{7, 2, 5, 0};

  const auto inner = [&](const SimilarityMatrix& t, std::size_t a) {
    std::vector<double> l;
    for (std::size_t j = 0; j < 4; ++j)
      if (j != a) l.push_back((t(a, j) - t(a, a)) - (r(a, j) - r(a, a)));
    return static_cast<double>(oracle::mean_exp(l, 0.2));
  };

  update_u(state, cfg, batch, s, &r);
  for (std::size_t a = 0; a < 4; ++a) CHECK(state.u1(batch[a]) == doctest::Approx(inner(s, a)).epsilon(1e-13));
  CHECK(std::isinf(state.log_u1[1]));

  const auto s2 = oracle::random_similarity(gen, 4);
  ++state.step;
  update_u(state, cfg, batch, s2, &r);
  for (std::size_t a = 0; a < 4; ++a)
    CHECK(state.u1(batch[a]) == doctest::Approx(0.7 * inner(s, a) + 0.3 * inner(s2, a)).epsilon(1e-13));

  const auto before = state.log_u2;
  cfg.gamma = 0.0;
  update_u(state, cfg, batch, s, &r);
  CHECK(state.log_u2 == before);

  cfg.gamma = 1.0;
  update_u(state, cfg, batch, s2, &r);
  for (std::size_t a = 0; a < 4; ++a) CHECK(state.u1(batch[a]) == doctest::Approx(inner(s2, a)).epsilon(1e-13));
}

TEST_CASE("u update rejects bad batches") {
  TrainerConfig cfg;
  auto state = init_state(cfg, 5, 3, 3);
  std::mt19937_64 gen(1);
  const auto s = oracle::random_similarity(gen, 2);
  CHECK_THROWS_AS(update_u(state, cfg, std::vector<std::size_t>{1}, s, nullptr), ArgumentError);
  CHECK_THROWS_AS(update_u(state, cfg, std::vector<std::size_t>{1, 9}, s, nullptr), ArgumentError);
  CHECK_THROWS_AS(update_u(state, cfg, std::vector<std::size_t>{1, 2, 3}, s, nullptr), ArgumentError);
}

TEST_CASE("estimators require u refreshed at the current step") {
  TrainerConfig cfg;
  cfg.tau_learnable = true;
  auto state = init_state(cfg, 5, 3, 3);
  std::mt19937_64 gen(1);
  const auto s = oracle::random_similarity(gen, 3);
  const std::vector<std::size_t> batch{0, 1, 2};
  CHECK_THROWS_AS(gradient_estimator(state, cfg, batch, s, nullptr), StateError);
  update_u(state, cfg, batch, s, nullptr);
  CHECK_NOTHROW(gradient_estimator(state, cfg, batch, s, nullptr));
  ++state.step;
  CHECK_THROWS_AS(tau_gradient(state, cfg, batch, s, nullptr), StateError);
  cfg.tau_learnable = false;
  update_u(state, cfg, batch, s, nullptr);
  CHECK_THROWS_AS(tau_gradient(state, cfg, batch, s, nullptr), StateError);
}

TEST_CASE("estimators match finite differences of the exact objective") {
  for (double tau : {0.05, 0.1, 0.5}) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const auto e = gradcheck::run(seed, tau);
      CHECK(e.drrho <= 1e-4);
      CHECK(e.gcl <= 1e-4);
      CHECK(e.tau <= 1e-4);
    }
  }
}

TEST_CASE("zero-shift gradient vanishes") {
  std::mt19937_64 gen(4);
  const auto s = oracle::random_similarity(gen, 6);
  TrainerConfig cfg;
  cfg.epsilon = 0.0;
  auto state = init_state(cfg, 6, 3, 3);
  std::vector<std::size_t> batch(6);
  std::iota(batch.begin(), batch.end(), 0);
  update_u(state, cfg, batch, s, &s);
  const auto g = gradient_estimator(state, cfg, batch, s, &s);
  // Every RHO loss is zero, so weights are uniform and rows and columns sum to zero.
  for (std::size_t i = 0; i < 6; ++i) {
    double row = 0.0, col = 0.0;
    for (std::size_t j = 0; j < 6; ++j) {
      row += g(i, j);
      col += g(j, i);
    }
    CHECK(std::abs(row) <= 1e-15);
    CHECK(std::abs(col) <= 1e-15);
  }
}

TEST_CASE("optimizer step clamps tau and aborts on non-finite gradients") {
  TrainerConfig cfg;
  cfg.tau_learnable = true;
  cfg.lr = 1.0;
  auto state = init_state(cfg, 4, 3, 3);
  TowerGradients g{Matrix(state.model.w1.rows(), 3), Matrix(state.model.w2.rows(), 3)};
  optimizer_step(state, cfg, g, 1e6);
  CHECK(state.model.tau == cfg.tau_min);
  CHECK(state.step == 1);
  g.w1(0, 0) = NAN;
  CHECK_THROWS_AS(optimizer_step(state, cfg, g), TrainingAborted);
  g.w1(0, 0) = 0.0;
  CHECK_THROWS_AS(optimizer_step(state, cfg, g, INFINITY), TrainingAborted);
  TowerGradients bad{Matrix(1, 1), Matrix(1, 1)};
  CHECK_THROWS_AS(optimizer_step(state, cfg, bad), ArgumentError);
}

TEST_CASE("epoch sampler draws without replacement inside each epoch") {
  std::vector<std::size_t> pool(23);
  std::iota(pool.begin(), pool.end(), 100);
  EpochSampler a(pool, 7), b(pool, 7), c(pool, 8);
  std::set<std::size_t> seen;
  for (int k = 0; k < 4; ++k) {
    const auto x = a.next(5);
    CHECK(x == b.next(5));
    seen.insert(x.begin(), x.end());
  }
  CHECK(seen.size() == 20);
  const auto next_epoch = a.next(5);  // only 3 left, so a new epoch starts
  CHECK(std::set<std::size_t>(next_epoch.begin(), next_epoch.end()).size() == 5);
  CHECK(c.next(23) != EpochSampler(pool, 7).next(23));
  CHECK_THROWS_AS(a.next(24), ArgumentError);
  CHECK_THROWS_AS(EpochSampler({}, 1), ArgumentError);
}

TEST_CASE("training is deterministic for every method") {
  const auto data = small_data();
  const auto ref = init_model(4, 8, 8, 0.1, 3);
  const auto cache = build_reference_cache(data, ref);
  for (Method m : {Method::openclip, Method::fastclip, Method::drrho_clip, Method::jest, Method::jest_topk}) {
    auto cfg = small_config(m);
    const auto a = train(cfg, data, &cache);
    const auto b = train(cfg, data, &cache);
    CHECK(a.state == b.state);
    CHECK(a.report.to_json() == b.report.to_json());
    CHECK(a.report.series == b.report.series);
    CHECK(std::isfinite(a.report.last("objective")));
    CHECK(a.report.last("test_recall_at_1") >= 0.0);
  }
}

TEST_CASE("training with distillation and learnable tau runs") {
  const auto data = small_data();
  const auto cache = build_reference_cache(data, init_model(4, 8, 8, 0.1, 3));
  auto cfg = small_config(Method::drrho_clip);
  cfg.distill = true;
  cfg.tau_learnable = true;
  const auto r = train(cfg, data, &cache);
  CHECK(r.state.model.tau != cfg.tau_init);
  CHECK(r.state.model.tau >= cfg.tau_min);
  CHECK(r.report.config["distill"] == true);
}

TEST_CASE("training contracts") {
  const auto data = small_data();
  const auto cache = build_reference_cache(data, init_model(4, 8, 8, 0.1, 3));
  SUBCASE("T = 0 yields the initial model and an empty series") {
    auto cfg = small_config(Method::drrho_clip);
    cfg.iterations = 0;
    const auto r = train(cfg, data, &cache);
    CHECK(r.report.series.empty());
    CHECK(r.state.model == init_model(4, 8, 8, 0.01, cfg.seed));
  }
  SUBCASE("evaluation cadence") {
    auto cfg = small_config(Method::fastclip);
    cfg.iterations = 100;
    const auto r = train(cfg, data, nullptr);
    std::size_t count = 0;
    for (const auto& row : r.report.series) count += row.metric == "objective";
    CHECK(count == 51);
  }
  SUBCASE("reference required") {
    CHECK_THROWS_AS(train(small_config(Method::drrho_clip), data, nullptr), ConfigError);
    auto cfg = small_config(Method::fastclip);
    cfg.distill = true;
    CHECK_THROWS_AS(train(cfg, data, nullptr), ConfigError);
  }
  SUBCASE("cache must belong to the dataset") {
    const auto other = small_data(2);
    CHECK_THROWS_AS(train(small_config(Method::drrho_clip), other, &cache), ConfigError);
  }
  SUBCASE("subset smaller than a batch") {
    auto cfg = small_config(Method::fastclip);
    cfg.data_fraction = 0.01;
    CHECK_THROWS_AS(train(cfg, data, nullptr), ConfigError);
  }
  SUBCASE("the report echoes the resolved config") {
    const auto r = train(small_config(Method::openclip), data, nullptr);
    CHECK(r.report.config["tau_learnable"] == true);
    CHECK(r.report.config["gamma"] == 0.8);
    CHECK(r.report.provenance["dataset_checksum"] == data.checksum());
  }
}

TEST_CASE("checkpoint round trip") {
  const auto data = small_data();
  const auto cache = build_reference_cache(data, init_model(4, 8, 8, 0.1, 3));
  auto cfg = small_config(Method::fastclip);
  const auto r = train(cfg, data, &cache);
  const auto dir = fs::temp_directory_path() / "drrho_test_trainer";
  fs::create_directories(dir);
  save_checkpoint(r.state, dir / "s.ckpt");
  const auto back = load_checkpoint(dir / "s.ckpt", cfg.adamw);
  CHECK(back == r.state);
  fs::remove_all(dir);
}
