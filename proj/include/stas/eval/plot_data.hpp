#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace stas::eval {

// One run's metrics.csv.
struct MetricsTable {
  std::string config_hash;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

MetricsTable read_metrics(const std::string& path);

struct MetricSeries {
  std::string metric;
  std::vector<double> iteration;
  std::vector<double> mean;
  std::vector<double> std;  // population std across runs
};

// Seed aggregation over run directories. Rows are aligned on iteration and
// kept only where every run has one. Throws ValidationError when the runs
// disagree on scenario or metric columns.
std::vector<MetricSeries> aggregate_runs(const std::vector<std::string>& run_dirs,
                                         std::string* combined_hash = nullptr);

// Writes <out_dir>/<metric>.csv per series; returns the paths.
std::vector<std::string> write_plot_data(const std::vector<MetricSeries>& series,
                                         const std::string& out_dir, const std::string& config_hash);

}  // namespace stas::eval
