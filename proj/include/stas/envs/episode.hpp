#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "stas/core/random.hpp"
#include "stas/envs/config.hpp"
#include "stas/envs/types.hpp"

namespace stas::envs {

struct ActionChoice {
  int action = 0;
  double log_prob = 0.0;
};

// Decision rule for one agent, given only that agent's state slice.
class AgentPolicy {
 public:
  virtual ~AgentPolicy() = default;
  virtual ActionChoice act(std::span<const double> state, Rng& rng) = 0;
};

class UniformRandomPolicy final : public AgentPolicy {
 public:
  explicit UniformRandomPolicy(std::size_t actions) : actions_(actions) {}
  ActionChoice act(std::span<const double> state, Rng& rng) override;

 private:
  std::size_t actions_;
};

struct EpisodeRecord {
  Trajectory trajectory;
  // Behaviour log-probabilities, [length x agents].
  std::vector<double> log_probs;
};

// Rolls out one episode. The environment is reset from derive_seed(seed, 0);
// policy sampling draws from derive_seed(seed, 1). Per-step rewards are kept
// only when `diagnostics` is set. Throws ContractError unless there is one
// policy per agent, ValidationError if a policy emits an invalid action.
EpisodeRecord run_episode(const EnvConfig& config, std::span<AgentPolicy* const> policies,
                          std::uint64_t seed, bool diagnostics = false);

}  // namespace stas::envs
