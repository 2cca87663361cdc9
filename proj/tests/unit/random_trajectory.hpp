#pragma once

#include <cstddef>

#include "stas/core/random.hpp"
#include "stas/envs/types.hpp"

namespace stas::testing {

// Synthetic trajectory with Gaussian states, uniform actions and a return
// drawn from N(0, 1).
inline envs::Trajectory random_trajectory(std::size_t agents, std::size_t steps,
                                          std::size_t state_dim, std::size_t actions, Rng& rng) {
  envs::Trajectory tr;
  tr.scenario = "random";
  tr.agents = agents;
  tr.state_dim = state_dim;
  tr.action_count = actions;
  tr.states.resize(steps * agents * state_dim);
  for (double& s : tr.states) s = rng.normal();
  tr.actions.resize(steps * agents);
  for (int& a : tr.actions) a = static_cast<int>(rng.uniform_int(actions));
  tr.episodic_return = rng.normal();
  return tr;
}

}  // namespace stas::testing
