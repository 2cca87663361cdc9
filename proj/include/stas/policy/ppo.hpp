#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "stas/core/nn.hpp"
#include "stas/core/optim.hpp"
#include "stas/core/random.hpp"
#include "stas/envs/episode.hpp"

namespace stas::policy {

struct PolicyConfig {
  std::size_t state_dim = 0;
  std::size_t action_count = 0;
  std::size_t hidden = 64;
  double gamma = 0.99;
  double lambda = 0.95;
  double clip = 0.2;
  std::size_t epochs = 4;
  // Rows per PPO minibatch; 0 uses the whole batch.
  std::size_t minibatch_size = 0;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  AdamConfig actor_optimizer{3e-4, 0.9, 0.999, 1e-8, 0.5};
  AdamConfig critic_optimizer{1e-3, 0.9, 0.999, 1e-8, 0.0};

  // Throws ConfigError naming the field.
  void validate() const;
  std::string describe_architecture() const;
};

// One agent's slice of one episode. Credits come from the decomposer.
struct AgentRollout {
  std::size_t state_dim = 0;
  std::vector<double> states;  // [T x state_dim]
  std::vector<int> actions;
  std::vector<double> log_probs;  // behaviour log-probabilities
  std::vector<double> credits;

  std::size_t length() const { return actions.size(); }
};

struct Advantages {
  std::vector<double> advantages;
  std::vector<double> returns;  // advantage + V(s_t), the critic's target
};

// Generalised advantage estimation treating credits as dense rewards.
// `values` holds V(s_t) for t < T; the state after the last step is
// terminal (value 0).
Advantages compute_advantages(std::span<const double> credits, std::span<const double> values,
                              double gamma, double lambda);

// In-place standardisation to mean 0 and std 1 (population std). A batch
// with zero spread is only centred.
void standardize(std::vector<double>& values);

struct UpdateStats {
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  double entropy = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  std::size_t samples = 0;
  bool refused = false;
  std::string refusal;
};

// Independent actor-critic learner for one agent. Actor and critic are
// separate tanh MLPs with their own Adam states.
class ActorCritic final : public envs::AgentPolicy {
 public:
  ActorCritic(PolicyConfig config, std::uint64_t seed);

  const PolicyConfig& config() const noexcept { return config_; }

  // Categorical sample from the actor's softmax; log_prob is the log of the
  // sampled action's probability.
  envs::ActionChoice act(std::span<const double> state, Rng& rng) override;
  int act_greedy(std::span<const double> state) const;
  std::vector<double> probabilities(std::span<const double> state) const;
  double value(std::span<const double> state) const;

  // Tape versions over a [rows x state_dim] batch.
  Tensor logits(Tape& tape, const Tensor& states) const;
  Tensor values(Tape& tape, const Tensor& states) const;

  // Clipped-surrogate update over this agent's rollouts. A non-finite loss
  // or gradient refuses the step and is reported in the stats; parameters
  // are left as they were before that step. Throws ContractError for an
  // empty batch.
  UpdateStats update(std::span<const AgentRollout> batch, Rng& rng);

  std::vector<Tensor> actor_parameters() const;
  std::vector<Tensor> critic_parameters() const;

  // Parameters plus optimiser state.
  void save(std::ostream& out) const;
  void load(std::istream& in);

 private:
  PolicyConfig config_;
  Linear a1_, a2_, a3_;
  Linear c1_, c2_, c3_;
  OptimizerState actor_opt_;
  OptimizerState critic_opt_;
};

// The PPO objective pieces for one minibatch, exposed for tests.
struct SurrogateTerms {
  Tensor loss;
  Tensor ratio;
  Tensor entropy;  // per row
};
SurrogateTerms surrogate_loss(Tape& tape, const Tensor& logits, std::span<const std::size_t> actions,
                              std::span<const double> old_log_probs,
                              std::span<const double> advantages, double clip, double entropy_coef);

}  // namespace stas::policy
