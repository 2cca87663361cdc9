#include "stas/envs/episode.hpp"

#include <cmath>

#include "stas/core/errors.hpp"
#include "stas/envs/environment.hpp"

namespace stas::envs {

ActionChoice UniformRandomPolicy::act(std::span<const double>, Rng& rng) {
  return {static_cast<int>(rng.uniform_int(actions_)),
          -std::log(static_cast<double>(actions_))};
}

EpisodeRecord run_episode(const EnvConfig& config, std::span<AgentPolicy* const> policies,
                          std::uint64_t seed, bool diagnostics) {
  config.validate();
  if (policies.size() != config.agents) {
    throw ContractError("run_episode needs one policy per agent");
  }
  auto env = make_environment(config);
  Rng rng(derive_seed(seed, 1));
  const std::size_t n = config.agents;

  EpisodeRecord rec;
  Trajectory& tr = rec.trajectory;
  tr.scenario = to_string(config.scenario);
  tr.agents = n;
  tr.state_dim = env->state_dim();
  tr.action_count = env->action_count();
  tr.seed = seed;
  tr.config_hash = config.hash();
  std::vector<double> rewards;

  JointState state = env->reset(derive_seed(seed, 0));
  JointAction joint(n);
  double total = 0.0;
  while (!env->done()) {
    tr.states.insert(tr.states.end(), state.values.begin(), state.values.end());
    for (std::size_t i = 0; i < n; ++i) {
      const ActionChoice c = policies[i]->act(state.agent(i), rng);
      if (c.action < 0 || static_cast<std::size_t>(c.action) >= env->action_count()) {
        throw ValidationError("policy for agent " + std::to_string(i) +
                              " emitted invalid action " + std::to_string(c.action));
      }
      joint[i] = c.action;
      rec.log_probs.push_back(c.log_prob);
    }
    tr.actions.insert(tr.actions.end(), joint.begin(), joint.end());
    StepResult r = env->step(joint);
    total += r.hidden_reward;
    rewards.push_back(r.hidden_reward);
    state = std::move(r.state);
  }
  tr.episodic_return = total;
  tr.success = env->success();
  if (diagnostics) tr.per_step_true_rewards = std::move(rewards);
  return rec;
}

}  // namespace stas::envs
