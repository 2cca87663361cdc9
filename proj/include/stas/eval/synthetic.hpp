#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "stas/core/optim.hpp"
#include "stas/decomposer/model.hpp"
#include "stas/envs/types.hpp"
#include "stas/eval/stats.hpp"

namespace stas::eval {

// Planted: each (i, t) earns 1 when the agent plays action 0 with both of
//   the first two state features above 0.5 (probability 1/16).
// SingleCell: only agent 0 at step 0 earns, 1 when it plays action 0.
// Zero: every return is 0.
enum class SyntheticKind { Planted, SingleCell, Zero };

const char* to_string(SyntheticKind k);
SyntheticKind synthetic_kind_from_string(const std::string& name);

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::Planted;
  std::size_t agents = 3;
  std::size_t steps = 16;
  std::size_t train_episodes = 1024;
  std::size_t heldout_episodes = 256;
  std::uint64_t seed = 0;

  static constexpr std::size_t kStateDim = 3;
  static constexpr std::size_t kActions = 4;
};

struct SyntheticEpisode {
  envs::Trajectory trajectory;  // return = sum of rewards
  std::vector<double> rewards;  // hidden, row-major [t][i]
};

struct SyntheticTask {
  SyntheticSpec spec;
  std::vector<SyntheticEpisode> train;
  std::vector<SyntheticEpisode> heldout;

  static SyntheticTask generate(const SyntheticSpec& spec);
};

struct SyntheticTraining {
  decomposer::DecomposerConfig model;  // dims are taken from the task
  AdamConfig optimizer{3e-4, 0.9, 0.999, 1e-8, 1.0};
  std::size_t batch = 64;
  std::size_t max_steps = 3000;
  // Wall-clock cap; 0 disables it.
  double time_budget_seconds = 300.0;
  // Linear decay to 0 over whichever of steps or time runs out first.
  bool decay_learning_rate = true;
  // Coalition samples for held-out credits; 0 uses model.k_samples.
  std::size_t eval_k = 0;
  std::uint64_t seed = 0;
};

struct SyntheticConfig {
  SyntheticSpec spec;
  SyntheticTraining training;
};

// YAML with sections synthetic and decomposer. Overrides are
// "section.key=value". Throws ConfigError naming the field.
SyntheticConfig parse_synthetic_config(const std::string& text,
                                       const std::vector<std::string>& overrides = {});
SyntheticConfig load_synthetic_config(const std::string& path,
                                      const std::vector<std::string>& overrides = {});
std::string synthetic_config_hash(const SyntheticConfig& config);

struct SyntheticReport {
  // Held-out per-(i, t) credit against hidden reward.
  Correlation correlation;
  double final_loss = 0.0;    // decomposition loss over the train split
  double heldout_loss = 0.0;  // same on the held-out split
  std::size_t steps = 0;
  double seconds = 0.0;
  // Held-out episodes where credit(0, 0) is strictly the largest entry.
  double first_cell_top_fraction = 0.0;
  std::vector<decomposer::CreditMatrix> heldout_credits;
};

// Trains a fresh decomposer on the train split only (no policy).
SyntheticReport run_synthetic(const SyntheticTask& task, const SyntheticTraining& training);

// One row per held-out (episode, t, agent) with the hidden reward.
void write_synthetic_csv(std::ostream& out, const SyntheticTask& task,
                         const SyntheticReport& report, const std::string& config_hash);

}  // namespace stas::eval
