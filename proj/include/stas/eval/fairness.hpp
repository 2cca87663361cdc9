#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "stas/envs/types.hpp"
#include "stas/eval/stats.hpp"
#include "stas/trainer/trainer.hpp"

namespace stas::eval {

struct FairnessRecord {
  std::size_t episode = 0;
  std::size_t t = 0;
  std::size_t agent = 0;
  double credit = 0.0;
  double inverse_distance = 0.0;
};

struct FairnessReport {
  std::vector<FairnessRecord> records;
  Correlation correlation;
  std::size_t episodes = 0;
  std::string config_hash;
};

struct FairnessOptions {
  std::size_t episodes = 1000;
  std::uint64_t seed = 0;
  // Coalition samples per credit; 0 takes the checkpoint's k_samples.
  std::size_t k_samples = 0;
  // Distances below this are clamped before taking the reciprocal.
  double distance_floor = 1e-3;
};

// Distance from predator `agent` to its nearest prey at step t, read from
// the prey offsets in the predator's state.
double nearest_prey_distance(const envs::Trajectory& tr, std::size_t t, std::size_t agent,
                             std::size_t preys);

// Rolls out the trained policies and pairs every credit with the
// reciprocal distance to the nearest prey. Throws ValidationError unless
// the trainer runs predator-prey.
FairnessReport evaluate_fairness(trainer::Trainer& trainer, const FairnessOptions& options);
FairnessReport evaluate_fairness(const std::string& checkpoint, const FairnessOptions& options);

// Per-record CSV with the config-hash comment line.
void write_fairness_csv(std::ostream& out, const FairnessReport& report);

}  // namespace stas::eval
