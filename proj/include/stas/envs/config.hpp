#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "stas/envs/types.hpp"

namespace stas::envs {

struct AliceBobParams {
  double wall_penalty = -0.2;
  double treasure_bonus = 200.0;
  // Plain-text grid; see layout.hpp for the alphabet.
  std::string layout;
};

struct ParticleParams {
  double damping = 0.5;
  double thrust = 0.025;
  double prey_thrust = 0.02;
  // 0 means one landmark per agent.
  std::size_t landmarks = 0;
  std::size_t preys = 1;
  double agent_radius = 0.05;
  double capture_radius = 0.1;
  double collision_penalty = 1.0;
  double capture_bonus = 10.0;
  double distance_penalty = 0.1;
  // Cooperative navigation success: every landmark has an agent this close
  // at the final step.
  double cover_radius = 0.1;
};

struct EnvConfig {
  Scenario scenario = Scenario::AliceBob;
  std::size_t agents = 2;
  std::size_t horizon = 64;
  std::uint64_t seed = 0;
  double gamma = 0.99;
  AliceBobParams alice_bob;
  ParticleParams particle;

  // Throws ConfigError naming the offending field.
  void validate() const;
  // Canonical key=value listing of every field, stable across runs.
  std::string describe() const;
  // Hex FNV-1a of describe().
  std::string hash() const;

  static EnvConfig alice_bob_default();
  static EnvConfig cooperative_navigation(std::size_t agents = 3);
  static EnvConfig predator_prey(std::size_t predators = 3);
};

}  // namespace stas::envs
