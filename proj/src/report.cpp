#include "drrho/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "drrho/error.hpp"

namespace drrho {

void ExperimentReport::record(std::size_t step, const std::string& metric, double value) {
  for (auto it = series.rbegin(); it != series.rend(); ++it) {
    if (it->metric != metric) continue;
    if (step < it->step) throw ArgumentError("series steps must be nondecreasing for " + metric);
    break;
  }
  series.push_back({step, metric, value});
  summary[metric] = value;
}

double ExperimentReport::last(const std::string& metric) const {
  const auto it = summary.find(metric);
  if (it == summary.end()) throw ArgumentError("no metric named " + metric);
  return it->second;
}

nlohmann::json ExperimentReport::to_json() const {
  nlohmann::json j;
  j["config"] = config;
  j["summary"] = summary;
  j["provenance"] = provenance;
  if (!table.empty()) j["table"] = table;
  return j;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string ExperimentReport::series_csv() const {
  std::ostringstream out;
  out << "step,metric,value\n";
  for (const auto& r : series) out << r.step << ',' << r.metric << ',' << format_double(r.value) << '\n';
  return out.str();
}

void ExperimentReport::write(const std::filesystem::path& dir, const std::string& stem) const {
  std::filesystem::create_directories(dir);
  std::ofstream js(dir / (stem + ".json"), std::ios::trunc);
  std::ofstream csv(dir / (stem + ".csv"), std::ios::trunc);
  if (!js || !csv) throw ConfigError("cannot write report under " + dir.string());
  js << to_json().dump(2) << '\n';
  csv << series_csv();
}

std::string plot_columns_csv(const std::string& x_name, const std::vector<double>& xs, const std::string& y_name,
                             const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw ArgumentError("plot columns differ in length");
  std::ostringstream out;
  out << x_name << ',' << y_name << '\n';
  for (std::size_t i = 0; i < xs.size(); ++i) out << format_double(xs[i]) << ',' << format_double(ys[i]) << '\n';
  return out.str();
}

}  // namespace drrho
