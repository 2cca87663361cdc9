#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "stas/core/errors.hpp"
#include "stas/envs/trajectory_io.hpp"
#include "stas/eval/fairness.hpp"
#include "stas/eval/plot_data.hpp"
#include "stas/eval/replay.hpp"
#include "stas/eval/synthetic.hpp"
#include "stas/trainer/config_io.hpp"
#include "stas/trainer/trainer.hpp"

namespace fs = std::filesystem;
using namespace stas;

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed,
              std::vector<std::string> overrides, bool paper_faithful, const std::string& resume_dir,
              std::string out_dir, bool quiet) {
  trainer::RunOptions options;
  if (!quiet) {
    options.on_iteration = [](const trainer::IterationRecord& r) {
      if (r.iteration % 10 == 0) {
        std::fprintf(stderr, "iteration %zu episodes %zu avg_return %.3f success %.3f\n", r.iteration,
                     r.episodes, r.avg_return, r.success_rate);
      }
    };
  }
  if (!resume_dir.empty()) {
    trainer::resume(resume_dir, options);
    std::cout << resume_dir << '\n';
    return 0;
  }
  if (config_path.empty()) throw ConfigError("--config", "required unless --resume is given");
  if (seed) overrides.push_back("trainer.seed=" + std::to_string(*seed));
  if (paper_faithful) overrides.push_back("trainer.paper_faithful=true");
  const auto config = trainer::load_train_config(config_path, overrides);
  if (out_dir.empty()) {
    out_dir = (fs::path("runs") / (fs::path(config_path).stem().string() + "_seed" +
                                   std::to_string(config.seed))).string();
  }
  trainer::train(config, out_dir, options);
  std::cout << out_dir << '\n';
  return 0;
}

int cmd_fairness(const std::string& checkpoint, const eval::FairnessOptions& options,
                 const std::string& out_csv) {
  const auto report = eval::evaluate_fairness(checkpoint, options);
  if (!out_csv.empty()) {
    std::ofstream out(out_csv);
    if (!out) throw Error("cannot write " + out_csv);
    eval::write_fairness_csv(out, report);
  }
  std::printf("episodes %zu pairs %zu pearson_r %.6f p_value %.6g%s\n", report.episodes,
              report.correlation.n, report.correlation.r, report.correlation.p_value,
              report.correlation.degenerate ? " degenerate" : "");
  return 0;
}

int cmd_synthetic(const std::string& config_path, const std::vector<std::string>& overrides,
                  const std::string& out_csv) {
  const auto config = config_path.empty() ? eval::parse_synthetic_config("", overrides)
                                          : eval::load_synthetic_config(config_path, overrides);
  const auto task = eval::SyntheticTask::generate(config.spec);
  const auto report = eval::run_synthetic(task, config.training);
  if (!out_csv.empty()) {
    std::ofstream out(out_csv);
    if (!out) throw Error("cannot write " + out_csv);
    eval::write_synthetic_csv(out, task, report, eval::synthetic_config_hash(config));
  }
  std::printf("kind %s steps %zu seconds %.1f correlation %.6f%s final_loss %.6g heldout_loss %.6g first_cell_top %.3f\n",
              eval::to_string(config.spec.kind), report.steps, report.seconds, report.correlation.r,
              report.correlation.degenerate ? " (degenerate)" : "", report.final_loss,
              report.heldout_loss, report.first_cell_top_fraction);
  return 0;
}

int cmd_plot(const std::vector<std::string>& runs, const std::string& out_dir) {
  std::string hash;
  const auto series = eval::aggregate_runs(runs, &hash);
  for (const auto& p : eval::write_plot_data(series, out_dir, hash)) std::cout << p << '\n';
  return 0;
}

int cmd_replay(const std::string& checkpoint, const std::string& trajectories, std::size_t last,
               const eval::ReplayOptions& options, const std::string& out_csv) {
  const auto t = trainer::Trainer::load(checkpoint);
  const auto logged = trajectories.empty() ? eval::buffered_trajectories(*t, last)
                                           : envs::load_trajectories(trajectories);
  if (out_csv.empty()) {
    eval::replay_credits(*t, logged, options, std::cout);
  } else {
    std::ofstream out(out_csv);
    if (!out) throw Error("cannot write " + out_csv);
    eval::replay_credits(*t, logged, options, out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shapley spatial-temporal credit assignment: training and evaluation"};
  app.require_subcommand(1);

  std::string config_path, resume_dir, out_dir;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  bool paper_faithful = false, quiet = false;
  auto* train = app.add_subcommand("train", "Train STAS + independent PPO");
  train->add_option("--config", config_path, "YAML config");
  train->add_option("--seed", seed, "Overrides trainer.seed");
  train->add_option("--set", overrides, "section.key=value override")->take_all();
  train->add_flag("--paper-faithful", paper_faithful, "No warmup, decomposer untrained at the first update");
  train->add_option("--resume", resume_dir, "Continue the run in this directory");
  train->add_option("--out", out_dir, "Run directory (default runs/<config>_seed<seed>)");
  train->add_flag("--quiet", quiet, "No progress lines");

  std::string checkpoint, fairness_csv;
  eval::FairnessOptions fairness;
  auto* fair = app.add_subcommand("eval-fairness", "Credit vs reciprocal prey distance");
  fair->add_option("--checkpoint", checkpoint, "Trainer checkpoint (predator_prey)")->required();
  fair->add_option("--episodes", fairness.episodes, "Evaluation episodes")->capture_default_str();
  fair->add_option("--seed", fairness.seed, "Rollout seed")->capture_default_str();
  fair->add_option("--k", fairness.k_samples, "Coalition samples (0 = checkpoint value)");
  fair->add_option("--out", fairness_csv, "Per-record CSV");

  std::string synth_config, synth_csv;
  std::vector<std::string> synth_overrides;
  auto* synth = app.add_subcommand("synthetic-decomp", "Decomposer recovery on planted rewards");
  synth->add_option("--config", synth_config, "YAML with synthetic and decomposer sections");
  synth->add_option("--set", synth_overrides, "section.key=value override")->take_all();
  synth->add_option("--out", synth_csv, "Held-out credit CSV");

  std::vector<std::string> runs;
  std::string plot_out = "plot-data";
  auto* plot = app.add_subcommand("plot-data", "Seed-aggregated metric series");
  plot->add_option("runs", runs, "Run directories")->required();
  plot->add_option("--out", plot_out, "Output directory")->capture_default_str();

  std::string replay_checkpoint, replay_traj, replay_csv;
  std::size_t replay_last = 1;
  eval::ReplayOptions replay;
  auto* rep = app.add_subcommand("replay", "Credit table of logged trajectories");
  rep->add_option("--checkpoint", replay_checkpoint, "Trainer checkpoint")->required();
  rep->add_option("--trajectories", replay_traj, "Trajectory file (default: newest buffered episodes)");
  rep->add_option("--last", replay_last, "Buffered episodes when no file is given")->capture_default_str();
  rep->add_option("--k", replay.k_samples, "Coalition samples (0 = checkpoint value)");
  rep->add_option("--seed", replay.seed, "Coalition sampling seed");
  rep->add_option("--out", replay_csv, "CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*train) return cmd_train(config_path, seed, overrides, paper_faithful, resume_dir, out_dir, quiet);
    if (*fair) return cmd_fairness(checkpoint, fairness, fairness_csv);
    if (*synth) return cmd_synthetic(synth_config, synth_overrides, synth_csv);
    if (*plot) return cmd_plot(runs, plot_out);
    if (*rep) return cmd_replay(replay_checkpoint, replay_traj, replay_last, replay, replay_csv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return 0;
}
