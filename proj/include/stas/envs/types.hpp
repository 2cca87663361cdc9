#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stas::envs {

enum class Scenario { AliceBob, CooperativeNavigation, PredatorPrey };

const char* to_string(Scenario s);
// Throws ConfigError for unknown names.
Scenario scenario_from_string(const std::string& name);

// Per-agent state vectors s_t^i, stored agent-major in one buffer.
struct JointState {
  std::size_t agents = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  JointState() = default;
  JointState(std::size_t n, std::size_t d) : agents(n), dim(d), values(n * d, 0.0) {}

  std::span<const double> agent(std::size_t i) const { return {values.data() + i * dim, dim}; }
  std::span<double> agent(std::size_t i) { return {values.data() + i * dim, dim}; }
};

// Discrete action index per agent.
using JointAction = std::vector<int>;

// Full-episode record. The learner sees states, actions and the single
// episodic return; per-step rewards are only filled in diagnostics mode and
// are stripped before anything reaches a learner.
struct Trajectory {
  std::string scenario;
  std::size_t agents = 0;
  std::size_t state_dim = 0;
  std::size_t action_count = 0;
  std::uint64_t seed = 0;
  std::string config_hash;

  // [length x agents x state_dim], states s_0 .. s_{T-1}.
  std::vector<double> states;
  // [length x agents].
  std::vector<int> actions;
  double episodic_return = 0.0;
  // Scenario success flag (treasure reached, any capture, all landmarks covered).
  bool success = false;
  std::optional<std::vector<double>> per_step_true_rewards;

  std::size_t length() const { return agents ? actions.size() / agents : 0; }
  std::span<const double> state(std::size_t t, std::size_t i) const {
    return {states.data() + (t * agents + i) * state_dim, state_dim};
  }
  int action(std::size_t t, std::size_t i) const { return actions[t * agents + i]; }

  // Learner-facing copy: identical except per_step_true_rewards is dropped.
  Trajectory without_diagnostics() const;
};

}  // namespace stas::envs
