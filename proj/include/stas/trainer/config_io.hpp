#pragma once

#include <string>
#include <vector>

#include "stas/trainer/config.hpp"

namespace stas::trainer {

// Declarative YAML file with sections env, decomposer, policy, trainer.
// Overrides are "section.key=value" and are applied before validation.
// Unknown keys, malformed values and a missing env.scenario raise
// ConfigError naming the field. The result is resolved and validated.
TrainConfig parse_train_config(const std::string& text,
                               const std::vector<std::string>& overrides = {});
TrainConfig load_train_config(const std::string& path,
                              const std::vector<std::string>& overrides = {});

// Canonical YAML listing every field; parse_train_config(to_yaml(c))
// reproduces c exactly.
std::string to_yaml(const TrainConfig& config);
// Hex FNV-1a of to_yaml(config).
std::string config_hash(const TrainConfig& config);

}  // namespace stas::trainer
