#include "drrho/trainer.hpp"

#include <cmath>
#include <string>

#include "drrho/baselines.hpp"
#include "drrho/contrastive.hpp"
#include "drrho/error.hpp"
#include "drrho/experiments.hpp"
#include "drrho/io.hpp"
#include "drrho/risk.hpp"
#include "drrho/rng.hpp"

namespace drrho {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
  throw ConfigError(field + ": " + why);
}

double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Convex combination in log space. Untouched entries take the new value.
double blend(double log_old, double log_new, double gamma) {
  if (log_old == kNegInf || gamma == 1.0) return log_new;
  if (gamma == 0.0) return log_old;
  return log_add_exp(std::log1p(-gamma) + log_old, std::log(gamma) + log_new);
}

// l_hat(a, j) / tau for j != a in increasing j, for one anchor on one side.
void side_logits(const SimilarityMatrix& s, const SimilarityMatrix* r, std::size_t a, Direction dir, double tau,
                 std::vector<double>& out) {
  out.clear();
  const std::size_t b = s.size();
  for (std::size_t j = 0; j < b; ++j) {
    if (j == a) continue;
    double l = (dir == Direction::image_side ? s(a, j) : s(j, a)) - s(a, a);
    if (r) l -= (dir == Direction::image_side ? (*r)(a, j) : (*r)(j, a)) - (*r)(a, a);
    out.push_back(l / tau);
  }
}

void check_batch(const TrainerState& state, std::span<const std::size_t> batch, const SimilarityMatrix& target,
                 const SimilarityMatrix* reference) {
  if (batch.size() < 2) throw ArgumentError("batch must hold at least 2 pairs");
  if (!target.square() || target.size() != batch.size())
    throw ArgumentError("similarity matrix does not match the batch");
  if (reference && (!reference->square() || reference->size() != batch.size()))
    throw ArgumentError("reference similarity matrix does not match the batch");
  for (std::size_t i : batch)
    if (i >= state.log_u1.size()) throw ArgumentError("batch index outside the dataset");
}

void require_fresh(const TrainerState& state) {
  if (state.u_step != state.step) throw StateError("u must be updated for this step before estimating gradients");
}

double log_denominator(double log_u, double epsilon) {
  return epsilon > 0.0 ? log_add_exp(std::log(epsilon), log_u) : log_u;
}

void check_finite(std::span<const double> v, const char* what, std::size_t step) {
  for (std::size_t k = 0; k < v.size(); ++k)
    if (!std::isfinite(v[k]))
      throw TrainingAborted(std::string("non-finite ") + what + " entry " + std::to_string(k) + " at step " +
                            std::to_string(step));
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) { return a * 0x9e3779b97f4a7c15ULL + b; }

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::openclip: return "openclip";
    case Method::fastclip: return "fastclip";
    case Method::drrho_clip: return "drrho-clip";
    case Method::jest: return "jest";
    case Method::jest_topk: return "jest-topk";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::openclip, Method::fastclip, Method::drrho_clip, Method::jest, Method::jest_topk})
    if (to_string(m) == name) return m;
  throw ArgumentError("unknown method '" + name + "'");
}

bool uses_reference(Method m) { return m == Method::drrho_clip || m == Method::jest || m == Method::jest_topk; }

TrainerConfig TrainerConfig::resolve() const {
  TrainerConfig c = *this;
  if (!c.tau_learnable) c.tau_learnable = c.method != Method::drrho_clip;
  if (c.embed_dim == 0) bad_field("embed_dim", "must be positive");
  if (c.batch_size < 2) bad_field("batch_size", "must be at least 2");
  if (!(c.lr > 0.0)) bad_field("lr", "must be positive");
  if (!(c.adamw.beta1 >= 0.0 && c.adamw.beta1 < 1.0)) bad_field("beta1", "must be in [0, 1)");
  if (!(c.adamw.beta2 >= 0.0 && c.adamw.beta2 < 1.0)) bad_field("beta2", "must be in [0, 1)");
  if (!(c.adamw.eps > 0.0)) bad_field("eps_opt", "must be positive");
  if (!(c.adamw.weight_decay >= 0.0)) bad_field("weight_decay", "must be >= 0");
  if (!(c.data_fraction > 0.0 && c.data_fraction <= 1.0)) bad_field("data_fraction", "must be in (0, 1]");
  if (!(c.tau > 0.0)) bad_field("tau", "must be positive");
  if (!(c.tau_init > 0.0)) bad_field("tau_init", "must be positive");
  if (!(c.tau_min > 0.0)) bad_field("tau_min", "must be positive");
  if (!(c.tau_lr_scale >= 0.0)) bad_field("tau_lr_scale", "must be >= 0");
  if (!(c.rho >= 0.0)) bad_field("rho", "must be >= 0");
  if (!(c.gamma >= 0.0 && c.gamma <= 1.0)) bad_field("gamma", "must be in [0, 1]");
  if (!(c.epsilon >= 0.0)) bad_field("epsilon", "must be >= 0");
  if (!(c.lambda >= 0.0 && c.lambda <= 1.0)) bad_field("lambda", "must be in [0, 1]");
  if (!(c.tau_ref > 0.0)) bad_field("tau_ref", "must be positive");
  if (!(c.selection_ratio > 0.0 && c.selection_ratio <= 1.0)) bad_field("ratio", "must be in (0, 1]");
  if (c.n_chunks < 1) bad_field("n_chunks", "must be >= 1");
  if (!(c.jest_temperature > 0.0)) bad_field("jest_temperature", "must be positive");
  if (!(c.jest_iteration_multiplier > 0.0)) bad_field("jest_iteration_multiplier", "must be positive");
  if (c.method == Method::jest || c.method == Method::jest_topk) {
    const auto super = static_cast<std::size_t>(std::ceil(static_cast<double>(c.batch_size) / c.selection_ratio - 1e-9));
    if (selection_size(c.selection_ratio, super) < c.n_chunks) bad_field("n_chunks", "exceeds the selected batch");
  }
  return c;
}

std::size_t TrainerConfig::effective_iterations() const {
  if (method == Method::jest || method == Method::jest_topk)
    return static_cast<std::size_t>(std::llround(static_cast<double>(iterations) * jest_iteration_multiplier));
  return iterations;
}

std::size_t TrainerConfig::eval_interval() const {
  if (eval_every > 0) return eval_every;
  return std::max<std::size_t>(1, effective_iterations() / 50);
}

nlohmann::json TrainerConfig::to_json() const {
  return {{"method", to_string(method)},
          {"embed_dim", embed_dim},
          {"batch_size", batch_size},
          {"iterations", iterations},
          {"effective_iterations", effective_iterations()},
          {"lr", lr},
          {"warmup_steps", warmup_steps},
          {"beta1", adamw.beta1},
          {"beta2", adamw.beta2},
          {"eps_opt", adamw.eps},
          {"weight_decay", adamw.weight_decay},
          {"seed", seed},
          {"data_fraction", data_fraction},
          {"tau_learnable", learnable()},
          {"tau", tau},
          {"tau_init", tau_init},
          {"tau_lr_scale", tau_lr_scale},
          {"tau_min", tau_min},
          {"rho", rho},
          {"gamma", gamma},
          {"epsilon", epsilon},
          {"distill", distill},
          {"lambda", lambda},
          {"tau_ref", tau_ref},
          {"ratio", selection_ratio},
          {"n_chunks", n_chunks},
          {"jest_temperature", jest_temperature},
          {"jest_iteration_multiplier", jest_iteration_multiplier},
          {"eval_every", eval_interval()},
          {"objective_rows", objective_rows}};
}

TrainerConfig TrainerConfig::from_json(const nlohmann::json& j) {
  TrainerConfig c;
  try {
    if (j.contains("method")) c.method = parse_method(j.at("method").get<std::string>());
    const auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    get("embed_dim", c.embed_dim);
    get("batch_size", c.batch_size);
    get("iterations", c.iterations);
    get("lr", c.lr);
    get("warmup_steps", c.warmup_steps);
    get("beta1", c.adamw.beta1);
    get("beta2", c.adamw.beta2);
    get("eps_opt", c.adamw.eps);
    get("weight_decay", c.adamw.weight_decay);
    get("seed", c.seed);
    get("data_fraction", c.data_fraction);
    if (j.contains("tau_learnable")) c.tau_learnable = j.at("tau_learnable").get<bool>();
    get("tau", c.tau);
    get("tau_init", c.tau_init);
    get("tau_lr_scale", c.tau_lr_scale);
    get("tau_min", c.tau_min);
    get("rho", c.rho);
    get("gamma", c.gamma);
    get("epsilon", c.epsilon);
    get("distill", c.distill);
    get("lambda", c.lambda);
    get("tau_ref", c.tau_ref);
    get("ratio", c.selection_ratio);
    get("n_chunks", c.n_chunks);
    get("jest_temperature", c.jest_temperature);
    get("jest_iteration_multiplier", c.jest_iteration_multiplier);
    get("eval_every", c.eval_every);
    get("objective_rows", c.objective_rows);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

double TrainerState::u1(std::size_t i) const { return std::exp(log_u1.at(i)); }
double TrainerState::u2(std::size_t i) const { return std::exp(log_u2.at(i)); }

TrainerState init_state(const TrainerConfig& config, std::size_t n, std::size_t d_x, std::size_t d_y) {
  TrainerState s;
  s.model = init_model(config.embed_dim, d_x, d_y, config.initial_tau(), config.seed);
  s.log_u1.assign(n, kNegInf);
  s.log_u2.assign(n, kNegInf);
  s.opt_w1 = AdamW(s.model.w1.size(), config.adamw);
  s.opt_w2 = AdamW(s.model.w2.size(), config.adamw);
  AdamWConfig tau_cfg = config.adamw;
  tau_cfg.weight_decay = 0.0;
  s.opt_tau = AdamW(1, tau_cfg);
  return s;
}

void update_u(TrainerState& state, const TrainerConfig& config, std::span<const std::size_t> batch,
              const SimilarityMatrix& target, const SimilarityMatrix* reference) {
  check_batch(state, batch, target, reference);
  const double tau = state.model.tau;
  const auto b = static_cast<long>(batch.size());
  std::vector<double> m1(batch.size()), m2(batch.size());
#pragma omp parallel
  {
    std::vector<double> x;
#pragma omp for schedule(static)
    for (long a = 0; a < b; ++a) {
      const auto u = static_cast<std::size_t>(a);
      side_logits(target, reference, u, Direction::image_side, tau, x);
      m1[u] = log_mean_exp(x);
      side_logits(target, reference, u, Direction::text_side, tau, x);
      m2[u] = log_mean_exp(x);
    }
  }
  for (std::size_t a = 0; a < batch.size(); ++a) {
    state.log_u1[batch[a]] = blend(state.log_u1[batch[a]], m1[a], config.gamma);
    state.log_u2[batch[a]] = blend(state.log_u2[batch[a]], m2[a], config.gamma);
  }
  state.u_step = state.step;
}

Matrix gradient_estimator(const TrainerState& state, const TrainerConfig& config,
                          std::span<const std::size_t> batch, const SimilarityMatrix& target,
                          const SimilarityMatrix* reference) {
  check_batch(state, batch, target, reference);
  require_fresh(state);
  const std::size_t b = batch.size();
  const double tau = state.model.tau;
  // G_k = mean_i 1/(eps + u_ki) * mean_{j != i} exp(l_hat/tau) * (grad s_ij - grad s_ii)
  const double norm = 1.0 / (static_cast<double>(b) * static_cast<double>(b - 1));
  Matrix g_img(b, b), g_txt(b, b);
  const auto bl = static_cast<long>(b);
#pragma omp parallel
  {
    std::vector<double> x;
#pragma omp for schedule(static)
    for (long al = 0; al < bl; ++al) {
      const auto a = static_cast<std::size_t>(al);
      // Image anchor a owns row a of g_img; text anchor a owns column a of g_txt.
      side_logits(target, reference, a, Direction::image_side, tau, x);
      double den = log_denominator(state.log_u1[batch[a]], config.epsilon);
      for (std::size_t j = 0, k = 0; j < b; ++j) {
        if (j == a) continue;
        const double w = std::exp(x[k++] - den) * norm;
        g_img(a, j) += w;
        g_img(a, a) -= w;
      }
      side_logits(target, reference, a, Direction::text_side, tau, x);
      den = log_denominator(state.log_u2[batch[a]], config.epsilon);
      for (std::size_t j = 0, k = 0; j < b; ++j) {
        if (j == a) continue;
        const double w = std::exp(x[k++] - den) * norm;
        g_txt(j, a) += w;
        g_txt(a, a) -= w;
      }
    }
  }
  for (std::size_t k = 0; k < g_img.size(); ++k) g_img.data()[k] += g_txt.data()[k];
  return g_img;
}

TowerGradients gradient_estimator(const TrainerState& state, const TrainerConfig& config,
                                  std::span<const std::size_t> batch, const BatchForward& forward,
                                  const SimilarityMatrix* reference) {
  return forward.backward(gradient_estimator(state, config, batch, forward.similarity(), reference));
}

double tau_gradient(const TrainerState& state, const TrainerConfig& config, std::span<const std::size_t> batch,
                    const SimilarityMatrix& target, const SimilarityMatrix* reference) {
  if (!config.learnable()) throw StateError("tau_gradient requires a learnable temperature");
  check_batch(state, batch, target, reference);
  require_fresh(state);
  const double tau = state.model.tau;
  const std::size_t b = batch.size();
  std::vector<double> x;
  double total = 0.0;
  for (Direction dir : {Direction::image_side, Direction::text_side}) {
    const auto& log_u = dir == Direction::image_side ? state.log_u1 : state.log_u2;
    double side = 0.0;
    for (std::size_t a = 0; a < b; ++a) {
      side_logits(target, reference, a, dir, tau, x);
      const double den = log_denominator(log_u[batch[a]], config.epsilon);
      double weighted = 0.0;
      for (double v : x) weighted += std::exp(v - den) * v;
      side += den - weighted / static_cast<double>(x.size());
    }
    total += side / static_cast<double>(b);
  }
  return total + 2.0 * config.rho;
}

double learning_rate(const TrainerConfig& config, std::size_t step) {
  return LrSchedule{config.lr, config.warmup_steps, config.effective_iterations()}.at(step);
}

void optimizer_step(TrainerState& state, const TrainerConfig& config, const TowerGradients& grad,
                    std::optional<double> tau_grad) {
  auto& m = state.model;
  if (grad.w1.rows() != m.w1.rows() || grad.w1.cols() != m.w1.cols() || grad.w2.rows() != m.w2.rows() ||
      grad.w2.cols() != m.w2.cols())
    throw ArgumentError("gradient shape does not match parameters");
  check_finite(grad.w1.flat(), "w1 gradient", state.step);
  check_finite(grad.w2.flat(), "w2 gradient", state.step);
  if (tau_grad) check_finite(std::span<const double>(&*tau_grad, 1), "tau gradient", state.step);

  const double lr = learning_rate(config, state.step);
  state.opt_w1.step(m.w1.flat(), grad.w1.flat(), lr);
  state.opt_w2.step(m.w2.flat(), grad.w2.flat(), lr);
  if (tau_grad) {
    double t = m.tau;
    state.opt_tau.step(std::span<double>(&t, 1), std::span<const double>(&*tau_grad, 1), lr * config.tau_lr_scale);
    m.tau = std::max(t, config.tau_min);
  }
  check_finite(m.w1.flat(), "w1", state.step);
  check_finite(m.w2.flat(), "w2", state.step);
  ++state.step;
}

EpochSampler::EpochSampler(std::vector<std::size_t> pool, std::uint64_t seed) : pool_(std::move(pool)), seed_(seed) {
  if (pool_.empty()) throw ArgumentError("sampler pool is empty");
  start_epoch();
}

void EpochSampler::start_epoch() {
  order_ = pool_;
  Rng rng(mix(seed_, epoch_));
  rng.shuffle(order_);
  cursor_ = 0;
}

std::vector<std::size_t> EpochSampler::next(std::size_t count) {
  if (count == 0 || count > pool_.size()) throw ArgumentError("batch size exceeds the sampling pool");
  if (cursor_ + count > order_.size()) {
    ++epoch_;
    start_epoch();
  }
  std::vector<std::size_t> out(order_.begin() + static_cast<long>(cursor_),
                               order_.begin() + static_cast<long>(cursor_ + count));
  cursor_ += count;
  return out;
}

double exact_objective(const TwoTowerModel& model, const PairedDataset& data, const EmbeddingCache* cache,
                       const std::vector<std::size_t>& rows) {
  const auto s = similarity_batch(model, gather_rows(data.xs, rows), gather_rows(data.ys, rows));
  if (!cache) return global_objective(s, nullptr, model.tau);
  const auto r = cached_similarity(*cache, rows);
  return global_objective(s, &r, model.tau);
}

TrainResult train(const TrainerConfig& config, const PairedDataset& data, const EmbeddingCache* cache) {
  const TrainerConfig cfg = config.resolve();
  const bool needs_cache = uses_reference(cfg.method) || cfg.distill;
  if (needs_cache && !cache) throw ConfigError("ref: method " + to_string(cfg.method) + " needs a reference cache");
  if (cache && needs_cache) {
    if (cache->size() != data.size()) throw ConfigError("ref: cache length does not match the dataset");
    if (cache->dataset_checksum != data.checksum())
      throw ConfigError("ref: cache was built for a different dataset");
  }
  const bool is_jest = cfg.method == Method::jest || cfg.method == Method::jest_topk;
  const std::size_t per_step =
      is_jest ? static_cast<std::size_t>(std::ceil(static_cast<double>(cfg.batch_size) / cfg.selection_ratio - 1e-9))
              : cfg.batch_size;
  const auto rows = data.train_subset(cfg.data_fraction);
  if (rows.size() < per_step) throw ConfigError("data_fraction: training subset is smaller than one batch");

  TrainResult result{init_state(cfg, data.size(), data.d_x(), data.d_y()), {}};
  auto& state = result.state;
  auto& report = result.report;
  report.config = cfg.to_json();
  report.provenance = {{"dataset_checksum", data.checksum()},
                       {"dataset_seed", data.params.seed},
                       {"seed", cfg.seed},
                       {"train_rows", rows.size()},
                       {"code_version", kCodeVersion}};
  if (cache && needs_cache)
    report.provenance["cache_source_id"] = cache->source_id;

  const EmbeddingCache* objective_cache = cfg.method == Method::drrho_clip ? cache : nullptr;
  const auto test_rows = data.test_indices();
  std::vector<std::size_t> objective_rows = rows;
  if (cfg.objective_rows > 0 && objective_rows.size() > cfg.objective_rows) objective_rows.resize(cfg.objective_rows);
  const auto evaluate = [&](std::size_t step) {
    report.record(step, "objective", exact_objective(state.model, data, objective_cache, objective_rows));
    if (!test_rows.empty()) {
      const auto s = similarity_batch(state.model, gather_rows(data.xs, test_rows), gather_rows(data.ys, test_rows));
      report.record(step, "test_recall_at_1", recall_at_1(s));
    }
    report.record(step, "tau", state.model.tau);
  };

  EpochSampler sampler(rows, mix(cfg.seed, 1));
  const std::size_t total = cfg.effective_iterations();
  const std::size_t interval = cfg.eval_interval();

  for (std::size_t t = 0; t < total; ++t) {
    if (t % interval == 0) evaluate(t);

    std::vector<std::size_t> batch = sampler.next(per_step);
    if (is_jest) {
      const auto super_s =
          similarity_batch(state.model, gather_rows(data.xs, batch), gather_rows(data.ys, batch));
      const auto super_r = cached_similarity(*cache, batch);
      JestParams jp{cfg.selection_ratio,
                    cfg.n_chunks,
                    cfg.method == Method::jest_topk ? SelectionMode::topk : SelectionMode::sample,
                    cfg.jest_temperature,
                    state.model.tau,
                    mix(cfg.seed, 1000 + t)};
      batch = jest_select(super_s, &super_r, batch, jp).selected;
    }

    const Matrix xs = gather_rows(data.xs, batch);
    const Matrix ys = gather_rows(data.ys, batch);
    const BatchForward fwd(state.model, xs, ys);
    const auto& s = fwd.similarity();
    SimilarityMatrix ref;
    if (needs_cache) ref = cached_similarity(*cache, batch);

    Matrix grad_s;
    std::optional<double> tau_grad;
    switch (cfg.method) {
      case Method::drrho_clip:
        update_u(state, cfg, batch, s, &ref);
        grad_s = gradient_estimator(state, cfg, batch, s, &ref);
        if (cfg.learnable()) tau_grad = tau_gradient(state, cfg, batch, s, &ref);
        break;
      case Method::fastclip:
        grad_s = gcl_trainer_step(state, cfg, batch, s);
        if (cfg.learnable()) tau_grad = tau_gradient(state, cfg, batch, s, nullptr);
        break;
      case Method::openclip:
      case Method::jest:
      case Method::jest_topk: {
        auto con = infonce_loss_grad(s, state.model.tau);
        grad_s = std::move(con.grad_s);
        if (cfg.learnable()) tau_grad = con.grad_tau;
        break;
      }
    }
    if (cfg.distill) {
      const auto dist = distillation_loss_grad(s, ref, state.model.tau, cfg.tau_ref);
      for (std::size_t k = 0; k < grad_s.size(); ++k)
        grad_s.data()[k] = (1.0 - cfg.lambda) * grad_s.data()[k] + cfg.lambda * dist.grad_s.data()[k];
      if (tau_grad) *tau_grad = (1.0 - cfg.lambda) * *tau_grad + cfg.lambda * dist.grad_tau;
    }
    optimizer_step(state, cfg, fwd.backward(grad_s), tau_grad);
  }
  if (total > 0) evaluate(total);
  return result;
}

void save_checkpoint(const TrainerState& state, const std::filesystem::path& path) {
  const auto row = [](const std::vector<double>& v) {
    Matrix m(1, v.size());
    std::copy(v.begin(), v.end(), m.row(0).begin());
    return m;
  };
  Matrix counters(1, 5);
  counters(0, 0) = static_cast<double>(state.step);
  counters(0, 1) = state.u_step == std::numeric_limits<std::size_t>::max() ? -1.0 : static_cast<double>(state.u_step);
  counters(0, 2) = static_cast<double>(state.opt_w1.steps());
  counters(0, 3) = static_cast<double>(state.opt_w2.steps());
  counters(0, 4) = static_cast<double>(state.opt_tau.steps());
  io::Container c;
  c.kind = io::Kind::trainer_checkpoint;
  c.arrays = {state.model.w1,
              state.model.w2,
              Matrix(1, 1, state.model.tau),
              row(state.log_u1),
              row(state.log_u2),
              counters,
              row(state.opt_w1.first_moment()),
              row(state.opt_w1.second_moment()),
              row(state.opt_w2.first_moment()),
              row(state.opt_w2.second_moment()),
              row(state.opt_tau.first_moment()),
              row(state.opt_tau.second_moment())};
  c.manifest = {{"model_id_hash", state.model.id_hash()}, {"step", state.step}, {"n", state.log_u1.size()}};
  io::write_container(path, c);
}

TrainerState load_checkpoint(const std::filesystem::path& path, const AdamWConfig& adamw) {
  auto c = io::read_container(path, io::Kind::trainer_checkpoint);
  if (c.arrays.size() != 12) throw FormatError(path.string() + ": expected 12 arrays");
  auto& a = c.arrays;
  const auto flat = [](const Matrix& m) { return std::vector<double>(m.flat().begin(), m.flat().end()); };
  TrainerState s;
  s.model = {a[0], a[1], a[2](0, 0)};
  s.log_u1 = flat(a[3]);
  s.log_u2 = flat(a[4]);
  if (s.log_u1.size() != s.log_u2.size()) throw FormatError(path.string() + ": u lengths differ");
  s.step = static_cast<std::size_t>(a[5](0, 0));
  s.u_step = a[5](0, 1) < 0.0 ? std::numeric_limits<std::size_t>::max() : static_cast<std::size_t>(a[5](0, 1));
  s.opt_w1 = AdamW(s.model.w1.size(), adamw);
  s.opt_w2 = AdamW(s.model.w2.size(), adamw);
  AdamWConfig tau_cfg = adamw;
  tau_cfg.weight_decay = 0.0;
  s.opt_tau = AdamW(1, tau_cfg);
  s.opt_w1.restore(flat(a[6]), flat(a[7]), static_cast<std::size_t>(a[5](0, 2)));
  s.opt_w2.restore(flat(a[8]), flat(a[9]), static_cast<std::size_t>(a[5](0, 3)));
  s.opt_tau.restore(flat(a[10]), flat(a[11]), static_cast<std::size_t>(a[5](0, 4)));
  if (c.manifest.value("model_id_hash", std::string{}) != s.model.id_hash())
    throw FormatError(path.string() + ": manifest model hash disagrees with parameters");
  return s;
}

}  // namespace drrho
