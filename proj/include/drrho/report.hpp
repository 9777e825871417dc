#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace drrho {

inline constexpr const char* kCodeVersion = "drrho 0.1.0";

struct SeriesRow {
  std::size_t step = 0;
  std::string metric;
  double value = 0.0;

  friend bool operator==(const SeriesRow&, const SeriesRow&) = default;
};

/// Metric time series plus the configuration that produced them.
struct ExperimentReport {
  nlohmann::json config = nlohmann::json::object();
  std::vector<SeriesRow> series;
  std::map<std::string, double> summary;
  nlohmann::json provenance = nlohmann::json::object();
  nlohmann::json table = nlohmann::json::array();

  /// Appends a row and updates the summary. Steps must not decrease per
  /// metric.
  void record(std::size_t step, const std::string& metric, double value);

  /// Last value recorded for `metric`; throws ArgumentError if absent.
  double last(const std::string& metric) const;

  nlohmann::json to_json() const;
  std::string series_csv() const;

  /// Writes `<dir>/<stem>.json` and `<dir>/<stem>.csv`.
  void write(const std::filesystem::path& dir, const std::string& stem) const;
};

/// Two-column CSV for plotting: header `x_name,y_name` then one row per point.
std::string plot_columns_csv(const std::string& x_name, const std::vector<double>& xs, const std::string& y_name,
                             const std::vector<double>& ys);

std::string format_double(double v);

}  // namespace drrho
