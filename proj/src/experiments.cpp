#include "drrho/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "drrho/contrastive.hpp"
#include "drrho/error.hpp"

namespace drrho {
namespace {

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd r;
  for (double x : v) r.mean += x;
  r.mean /= static_cast<double>(v.size());
  for (double x : v) r.std += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(r.std / static_cast<double>(v.size()));
  return r;
}

double population_variance(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return var / static_cast<double>(v.size());
}

std::string run_key(Method m, double fraction) { return to_string(m) + "@" + format_double(fraction); }

}  // namespace

double recall_at_1(const SimilarityMatrix& s) {
  if (s.size() == 0) throw ArgumentError("recall_at_1: empty similarity matrix");
  if (!s.square()) throw ArgumentError("recall_at_1: similarity matrix must be square");
  const std::size_t n = s.size();
  std::size_t rows = 0, cols = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best_r = 0, best_c = 0;
    for (std::size_t j = 1; j < n; ++j) {
      if (s(i, j) > s(i, best_r)) best_r = j;
      if (s(j, i) > s(best_c, i)) best_c = j;
    }
    rows += best_r == i;
    cols += best_c == i;
  }
  return 0.5 * (static_cast<double>(rows) + static_cast<double>(cols)) / static_cast<double>(n);
}

LossVarianceResult loss_variance(const SimilarityMatrix& target, const SimilarityMatrix* reference) {
  if (!target.square()) throw ArgumentError("loss_variance: similarity matrix must be square");
  if (reference && (!reference->square() || reference->size() != target.size()))
    throw ArgumentError("loss_variance: reference shape does not match target");
  const std::size_t n = target.size();
  if (n < 3) throw ArgumentError("loss_variance: need at least 2 negatives per anchor");
  LossVarianceResult r;
  r.per_image.resize(n);
  r.per_text.resize(n);
  std::vector<double> img(n - 1), txt(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0, k = 0; j < n; ++j) {
      if (j == i) continue;
      img[k] = reference ? rho_pairwise_loss(target, *reference, i, j, Direction::image_side)
                         : pairwise_loss(target, i, j, Direction::image_side);
      txt[k] = reference ? rho_pairwise_loss(target, *reference, i, j, Direction::text_side)
                         : pairwise_loss(target, i, j, Direction::text_side);
      ++k;
    }
    r.per_image[i] = population_variance(img);
    r.per_text[i] = population_variance(txt);
  }
  r.image = mean_std(r.per_image);
  r.text = mean_std(r.per_text);
  return r;
}

ScalingFit fit_scaling_law(std::span<const ScalingPoint> points) {
  std::set<double> distinct;
  for (const auto& p : points) {
    if (!(p.compute > 0.0) || !(p.error > 0.0)) throw ArgumentError("fit_scaling_law: compute and error must be positive");
    distinct.insert(p.compute);
  }
  if (distinct.size() < 2) throw ArgumentError("fit_scaling_law: need at least 2 distinct compute values");
  const auto n = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& p : points) {
    mx += std::log(p.compute);
    my += std::log(p.error);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : points) {
    const double dx = std::log(p.compute) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(p.error) - my);
  }
  ScalingFit f;
  f.beta = sxy / sxx;
  const double log_alpha = my - f.beta * mx;
  f.alpha = std::exp(log_alpha);
  double ss = 0.0;
  for (const auto& p : points) {
    const double e = std::log(p.error) - (log_alpha + f.beta * std::log(p.compute));
    ss += e * e;
  }
  f.residual = std::sqrt(ss / n);
  return f;
}

std::vector<ScalingPoint> best_error_per_compute(const std::map<double, std::vector<double>>& runs) {
  std::vector<ScalingPoint> out;
  for (const auto& [compute, errors] : runs) {
    if (errors.empty()) throw ArgumentError("best_error_per_compute: empty compute group");
    out.push_back({compute, *std::min_element(errors.begin(), errors.end())});
  }
  return out;
}

double error_from_recall(double recall) { return std::clamp(1.0 - recall, 1e-6, 1.0 - 1e-6); }

Benchmark setup_benchmark(const BenchmarkConfig& config) {
  if (!(config.target_share > 0.0 && config.target_share <= 1.0))
    throw ConfigError("target_share: must be in (0, 1]");
  auto data = generate_synthetic(config.data);
  TrainerConfig ref_cfg = config.reference;
  ref_cfg.data_fraction = 1.0;
  auto run = train(ref_cfg, data, nullptr);
  auto cache = build_reference_cache(data, run.state.model);
  return {std::move(data), std::move(run.state.model), std::move(cache), std::move(run.report)};
}

ExperimentReport data_efficiency_sweep(const TrainerConfig& base, const std::vector<Method>& methods,
                                       const std::vector<double>& fractions, const PairedDataset& data,
                                       const EmbeddingCache* cache, double target_share) {
  if (methods.empty()) throw ConfigError("methods: at least one method is required");
  if (fractions.empty()) throw ConfigError("fractions: at least one fraction is required");
  if (!(target_share > 0.0 && target_share <= 1.0)) throw ConfigError("target_share: must be in (0, 1]");
  const std::size_t pool = data.train_indices().size();
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("fractions: each fraction must be in (0, 1]");
    const auto rows = static_cast<std::size_t>(std::ceil(f * target_share * static_cast<double>(pool) - 1e-9));
    if (rows < 2 * base.batch_size)
      throw ConfigError("fractions: fraction " + format_double(f) + " yields fewer than 2 * batch_size samples");
  }

  ExperimentReport report;
  report.config = base.resolve().to_json();
  report.config["fractions"] = fractions;
  report.config["target_share"] = target_share;
  nlohmann::json names = nlohmann::json::array();
  for (Method m : methods) names.push_back(to_string(m));
  report.config["methods"] = names;
  report.provenance = {{"dataset_checksum", data.checksum()}, {"seed", base.seed}, {"code_version", kCodeVersion}};
  if (cache) report.provenance["cache_source_id"] = cache->source_id;

  for (Method m : methods) {
    for (double f : fractions) {
      TrainerConfig cfg = base;
      cfg.method = m;
      cfg.tau_learnable = base.tau_learnable;
      cfg.data_fraction = f * target_share;
      auto run = train(cfg, data, cache);
      const double recall = run.report.last("test_recall_at_1");
      const double objective = run.report.last("objective");
      const auto key = run_key(m, f);
      report.record(0, key + ":test_recall_at_1", recall);
      report.record(0, key + ":objective", objective);
      report.table.push_back({{"method", to_string(m)},
                              {"fraction", f},
                              {"train_rows", run.report.provenance["train_rows"]},
                              {"iterations", cfg.resolve().effective_iterations()},
                              {"test_recall_at_1", recall},
                              {"objective", objective}});
    }
  }
  return report;
}

ScalingSweepResult scaling_sweep(const TrainerConfig& base, const std::vector<Method>& methods,
                                 const ScalingSweepConfig& sweep, const PairedDataset& data,
                                 const EmbeddingCache* cache) {
  if (sweep.dims.empty() || sweep.budgets.empty() || sweep.fractions.empty())
    throw ConfigError("scaling: dims, budgets and fractions must be non-empty");
  ScalingSweepResult result;
  result.report.config = base.resolve().to_json();
  result.report.config["dims"] = sweep.dims;
  result.report.config["budgets"] = sweep.budgets;
  result.report.config["fractions"] = sweep.fractions;
  result.report.config["target_share"] = sweep.target_share;
  result.report.provenance = {
      {"dataset_checksum", data.checksum()}, {"seed", base.seed}, {"code_version", kCodeVersion}};

  for (Method m : methods) {
    std::map<double, std::vector<double>> groups;
    for (std::size_t d : sweep.dims) {
      for (std::size_t budget : sweep.budgets) {
        for (double f : sweep.fractions) {
          TrainerConfig cfg = base;
          cfg.method = m;
          cfg.embed_dim = d;
          cfg.iterations = budget;
          cfg.data_fraction = f * sweep.target_share;
          const auto resolved = cfg.resolve();
          auto run = train(cfg, data, cache);
          const double params = static_cast<double>(run.state.model.parameter_count());
          const double samples = static_cast<double>(resolved.effective_iterations() * resolved.batch_size);
          const double compute = params * samples;
          const double error = error_from_recall(run.report.last("test_recall_at_1"));
          groups[compute].push_back(error);
          result.report.table.push_back({{"method", to_string(m)},
                                         {"embed_dim", d},
                                         {"iterations", budget},
                                         {"fraction", f},
                                         {"compute", compute},
                                         {"error", error}});
        }
      }
    }
    auto points = best_error_per_compute(groups);
    const auto fit = fit_scaling_law(points);
    result.report.record(0, to_string(m) + ":alpha", fit.alpha);
    result.report.record(0, to_string(m) + ":beta", fit.beta);
    result.report.record(0, to_string(m) + ":residual", fit.residual);
    result.points[m] = std::move(points);
    result.fits[m] = fit;
  }
  return result;
}

}  // namespace drrho
