#include "stas/trainer/config.hpp"

#include <cmath>

#include "stas/core/errors.hpp"
#include "stas/envs/environment.hpp"

namespace stas::trainer {

const char* to_string(CreditMode m) { return m == CreditMode::Stas ? "stas" : "uniform"; }

CreditMode credit_mode_from_string(const std::string& name) {
  if (name == "stas") return CreditMode::Stas;
  if (name == "uniform") return CreditMode::Uniform;
  throw ConfigError("trainer.credit_mode", "unknown credit mode '" + name + "'");
}

void TrainConfig::resolve() {
  env.seed = seed;
  env.validate();
  const auto probe = envs::make_environment(env);
  decomposer.state_dim = probe->state_dim();
  decomposer.action_count = probe->action_count();
  decomposer.horizon = env.horizon;
  policy.state_dim = probe->state_dim();
  policy.action_count = probe->action_count();
  policy.gamma = env.gamma;
}

void TrainConfig::validate() const {
  env.validate();
  decomposer.validate();
  policy.validate();
  if (decomposer.horizon < env.horizon) {
    throw ConfigError("decomposer.horizon", "shorter than env.horizon");
  }
  if (!(decomposer_optimizer.learning_rate > 0.0)) {
    throw ConfigError("decomposer.learning_rate", "must be positive");
  }
  if (iterations < 1) throw ConfigError("trainer.iterations", "K must be at least 1");
  if (decomposer_every < 1) throw ConfigError("trainer.decomposer_every", "M must be at least 1");
  if (episodes_per_iteration < 1) {
    throw ConfigError("trainer.episodes_per_iteration", "must be at least 1");
  }
  if (max_inner_epochs < 1) throw ConfigError("trainer.max_inner_epochs", "must be at least 1");
  if (!(plateau_tolerance >= 0.0)) {
    throw ConfigError("trainer.plateau_tolerance", "must be non-negative");
  }
  if (plateau_patience < 1) throw ConfigError("trainer.plateau_patience", "must be at least 1");
  if (policy_batch < 1) throw ConfigError("trainer.policy_batch", "must be at least 1");
  if (decomposer_batch < 1) throw ConfigError("trainer.decomposer_batch", "must be at least 1");
  if (buffer_capacity < 1) throw ConfigError("trainer.buffer_capacity", "must be at least 1");
  if (policy_batch > buffer_capacity) {
    throw ConfigError("trainer.policy_batch", "exceeds trainer.buffer_capacity");
  }
  if (moving_average < 1) throw ConfigError("trainer.moving_average", "must be at least 1");
  if (paper_faithful && warmup_episodes != 0) {
    throw ConfigError("trainer.warmup_episodes", "must be 0 in paper-faithful mode");
  }
}

}  // namespace stas::trainer
