#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "drrho/data.hpp"
#include "drrho/encoder.hpp"
#include "drrho/report.hpp"
#include "drrho/trainer.hpp"

namespace drrho {

/// Mean of row-wise and column-wise top-1 retrieval accuracy. Ties resolve
/// to the lowest index.
double recall_at_1(const SimilarityMatrix& s);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

struct LossVarianceResult {
  MeanStd image;
  MeanStd text;
  std::vector<double> per_image;
  std::vector<double> per_text;
};

/// Per-anchor population variance over j != i of the pairwise loss, or of the
/// RHO loss when `reference` is given.
LossVarianceResult loss_variance(const SimilarityMatrix& target, const SimilarityMatrix* reference);

struct ScalingPoint {
  double compute = 0.0;
  double error = 0.0;
};

struct ScalingFit {
  double alpha = 0.0;
  double beta = 0.0;
  double residual = 0.0;  // RMS in log space
};

/// Least squares of log E on log C.
ScalingFit fit_scaling_law(std::span<const ScalingPoint> points);

/// Lowest error per compute value.
std::vector<ScalingPoint> best_error_per_compute(const std::map<double, std::vector<double>>& runs);

/// 1 - recall clipped to [1e-6, 1 - 1e-6].
double error_from_recall(double recall);

struct BenchmarkConfig {
  SyntheticParams data{};
  TrainerConfig reference{};
  /// Share of the training pool that a target's 100% subset covers.
  double target_share = 0.25;
};

struct Benchmark {
  PairedDataset data;
  TwoTowerModel reference;
  EmbeddingCache cache;
  ExperimentReport reference_report;
};

/// Generates the dataset and trains the reference on the whole training pool.
Benchmark setup_benchmark(const BenchmarkConfig& config);

/// One run per (method, fraction), all with the same iteration budget.
/// `fraction` is relative to `target_share` of the training pool.
ExperimentReport data_efficiency_sweep(const TrainerConfig& base, const std::vector<Method>& methods,
                                       const std::vector<double>& fractions, const PairedDataset& data,
                                       const EmbeddingCache* cache, double target_share = 1.0);

struct ScalingSweepConfig {
  std::vector<std::size_t> dims;
  std::vector<std::size_t> budgets;   // iteration counts
  std::vector<double> fractions;      // dataset sizes, relative to target_share
  double target_share = 1.0;
};

struct ScalingSweepResult {
  std::map<Method, std::vector<ScalingPoint>> points;  // best error per compute
  std::map<Method, ScalingFit> fits;
  ExperimentReport report;
};

ScalingSweepResult scaling_sweep(const TrainerConfig& base, const std::vector<Method>& methods,
                                 const ScalingSweepConfig& sweep, const PairedDataset& data,
                                 const EmbeddingCache* cache);

}  // namespace drrho
