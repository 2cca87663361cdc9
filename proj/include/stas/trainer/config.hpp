#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "stas/core/optim.hpp"
#include "stas/decomposer/model.hpp"
#include "stas/envs/config.hpp"
#include "stas/policy/ppo.hpp"

namespace stas::trainer {

// Where the per-step learning signal comes from.
enum class CreditMode {
  Stas,     // decomposer credits
  Uniform,  // r_ep / (N T) on every (i, t); no decomposer phases
};

const char* to_string(CreditMode m);
CreditMode credit_mode_from_string(const std::string& name);

struct TrainConfig {
  envs::EnvConfig env;
  decomposer::DecomposerConfig decomposer;
  // The return loss sums N*T credits and is sharply curved; 1e-3 oscillates.
  AdamConfig decomposer_optimizer{3e-4, 0.9, 0.999, 1e-8, 1.0};
  policy::PolicyConfig policy;

  std::uint64_t seed = 0;
  std::size_t iterations = 100;
  std::size_t episodes_per_iteration = 32;
  // M: the decomposer trains at iterations k with k % M == 0.
  std::size_t decomposer_every = 5;
  std::size_t max_inner_epochs = 20;
  double plateau_tolerance = 1e-3;
  std::size_t plateau_patience = 3;
  // D: most recent episodes used for a policy update.
  std::size_t policy_batch = 32;
  // D': episodes sampled from the buffer for a decomposer phase.
  std::size_t decomposer_batch = 64;
  std::size_t buffer_capacity = 1000;
  std::size_t warmup_episodes = 100;
  CreditMode credit_mode = CreditMode::Stas;
  // No warmup and no decomposer phase before iteration 0.
  bool paper_faithful = false;
  std::size_t moving_average = 100;
  // Iterations between checkpoints; 0 writes one at the end only.
  std::size_t checkpoint_every = 0;

  // Copies scenario dimensions and discount into the model configs.
  void resolve();
  // Throws ConfigError naming the field.
  void validate() const;
};

}  // namespace stas::trainer
