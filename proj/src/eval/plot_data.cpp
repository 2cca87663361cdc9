#include "stas/eval/plot_data.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <yaml-cpp/yaml.h>

#include "stas/core/errors.hpp"
#include "stas/eval/stats.hpp"

namespace stas::eval {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

std::string run_scenario(const fs::path& dir) {
  try {
    const YAML::Node root = YAML::LoadFile((dir / "config.yaml").string());
    return root["env"]["scenario"].as<std::string>();
  } catch (const YAML::Exception& e) {
    throw ValidationError("plot-data: cannot read scenario from " + (dir / "config.yaml").string());
  }
}

}  // namespace

MetricsTable read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("plot-data: cannot open " + path);
  MetricsTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string key = "# config_hash=";
      if (line.rfind(key, 0) == 0) t.config_hash = line.substr(key.size());
      continue;
    }
    if (t.columns.empty()) {
      t.columns = split(line);
      continue;
    }
    const auto cells = split(line);
    if (cells.size() != t.columns.size()) throw ValidationError("plot-data: ragged row in " + path);
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(std::stod(c));
    t.rows.push_back(std::move(row));
  }
  if (t.columns.empty() || t.columns[0] != "iteration") {
    throw ValidationError("plot-data: " + path + " has no iteration header");
  }
  return t;
}

std::vector<MetricSeries> aggregate_runs(const std::vector<std::string>& run_dirs,
                                         std::string* combined_hash) {
  if (run_dirs.empty()) throw ValidationError("plot-data: no run directories");
  std::vector<MetricsTable> tables;
  std::string scenario;
  std::set<std::string> hashes;
  for (const auto& d : run_dirs) {
    const std::string s = run_scenario(d);
    if (scenario.empty()) scenario = s;
    if (s != scenario) {
      throw ValidationError("plot-data: mismatched scenarios (" + scenario + " vs " + s + " in " + d + ")");
    }
    tables.push_back(read_metrics((fs::path(d) / "metrics.csv").string()));
    if (tables.back().columns != tables.front().columns) {
      throw ValidationError("plot-data: metric columns differ in " + d);
    }
    hashes.insert(tables.back().config_hash);
  }
  if (combined_hash) {
    combined_hash->clear();
    for (const auto& h : hashes) *combined_hash += (combined_hash->empty() ? "" : ",") + h;
  }

  // iteration -> per-run row
  std::map<double, std::vector<const std::vector<double>*>> aligned;
  for (const auto& t : tables) {
    for (const auto& row : t.rows) aligned[row[0]].push_back(&row);
  }
  const auto& columns = tables.front().columns;
  std::vector<MetricSeries> out;
  for (std::size_t c = 1; c < columns.size(); ++c) {
    MetricSeries s;
    s.metric = columns[c];
    for (const auto& [it, rows] : aligned) {
      if (rows.size() != tables.size()) continue;
      std::vector<double> v;
      for (const auto* r : rows) v.push_back((*r)[c]);
      const auto ms = mean_std(v);
      s.iteration.push_back(it);
      s.mean.push_back(ms.mean);
      s.std.push_back(ms.std);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::string> write_plot_data(const std::vector<MetricSeries>& series,
                                         const std::string& out_dir, const std::string& config_hash) {
  fs::create_directories(out_dir);
  std::vector<std::string> paths;
  char buf[128];
  for (const auto& s : series) {
    const auto path = (fs::path(out_dir) / (s.metric + ".csv")).string();
    std::ofstream out(path);
    if (!out) throw Error("plot-data: cannot write " + path);
    out << "# config_hash=" << config_hash << '\n';
    out << "iteration,mean,std\n";
    for (std::size_t k = 0; k < s.iteration.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g", s.iteration[k], s.mean[k], s.std[k]);
      out << buf << '\n';
    }
    paths.push_back(path);
  }
  return paths;
}

}  // namespace stas::eval
