#include "stas/envs/config.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "stas/core/errors.hpp"
#include "stas/core/init.hpp"
#include "stas/envs/layout.hpp"

namespace stas::envs {

const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::AliceBob: return "alice_bob";
    case Scenario::CooperativeNavigation: return "cooperative_navigation";
    case Scenario::PredatorPrey: return "predator_prey";
  }
  return "?";
}

Scenario scenario_from_string(const std::string& name) {
  if (name == "alice_bob") return Scenario::AliceBob;
  if (name == "cooperative_navigation") return Scenario::CooperativeNavigation;
  if (name == "predator_prey") return Scenario::PredatorPrey;
  throw ConfigError("env.scenario", "unknown scenario '" + name + "'");
}

Trajectory Trajectory::without_diagnostics() const {
  Trajectory copy = *this;
  copy.per_step_true_rewards.reset();
  return copy;
}

namespace {

void require_positive(double v, const char* field) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(field, "must be positive and finite");
}

std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void EnvConfig::validate() const {
  if (agents < 1) throw ConfigError("env.agents", "need at least one agent");
  if (horizon < 1) throw ConfigError("env.horizon", "horizon must be at least 1");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("env.gamma", "must lie in [0, 1)");
  switch (scenario) {
    case Scenario::AliceBob:
      if (agents != 2) throw ConfigError("env.agents", "Alice & Bob has exactly 2 agents");
      if (!std::isfinite(alice_bob.wall_penalty)) {
        throw ConfigError("env.wall_penalty", "must be finite");
      }
      if (!std::isfinite(alice_bob.treasure_bonus)) {
        throw ConfigError("env.treasure_bonus", "must be finite");
      }
      GridLayout::parse(alice_bob.layout.empty() ? default_layout_text() : alice_bob.layout);
      break;
    case Scenario::CooperativeNavigation:
    case Scenario::PredatorPrey:
      if (!(particle.damping >= 0.0 && particle.damping < 1.0)) {
        throw ConfigError("env.damping", "must lie in [0, 1)");
      }
      require_positive(particle.thrust, "env.thrust");
      require_positive(particle.agent_radius, "env.agent_radius");
      require_positive(particle.capture_radius, "env.capture_radius");
      require_positive(particle.cover_radius, "env.cover_radius");
      if (scenario == Scenario::PredatorPrey) {
        require_positive(particle.prey_thrust, "env.prey_thrust");
        if (particle.preys < 1) throw ConfigError("env.preys", "need at least one prey");
      }
      break;
  }
}

std::string EnvConfig::describe() const {
  std::ostringstream s;
  s << "scenario=" << to_string(scenario) << '\n'
    << "agents=" << agents << '\n'
    << "horizon=" << horizon << '\n'
    << "seed=" << seed << '\n'
    << "gamma=" << exact(gamma) << '\n';
  if (scenario == Scenario::AliceBob) {
    s << "wall_penalty=" << exact(alice_bob.wall_penalty) << '\n'
      << "treasure_bonus=" << exact(alice_bob.treasure_bonus) << '\n'
      << "layout=\n"
      << GridLayout::parse(alice_bob.layout.empty() ? default_layout_text() : alice_bob.layout)
             .text();
  } else {
    s << "damping=" << exact(particle.damping) << '\n'
      << "thrust=" << exact(particle.thrust) << '\n'
      << "prey_thrust=" << exact(particle.prey_thrust) << '\n'
      << "landmarks=" << particle.landmarks << '\n'
      << "preys=" << particle.preys << '\n'
      << "agent_radius=" << exact(particle.agent_radius) << '\n'
      << "capture_radius=" << exact(particle.capture_radius) << '\n'
      << "collision_penalty=" << exact(particle.collision_penalty) << '\n'
      << "capture_bonus=" << exact(particle.capture_bonus) << '\n'
      << "distance_penalty=" << exact(particle.distance_penalty) << '\n'
      << "cover_radius=" << exact(particle.cover_radius) << '\n';
  }
  return s.str();
}

std::string EnvConfig::hash() const { return hex64(fnv1a64(describe())); }

EnvConfig EnvConfig::alice_bob_default() {
  EnvConfig c;
  c.scenario = Scenario::AliceBob;
  c.agents = 2;
  c.horizon = 64;
  c.alice_bob.layout = default_layout_text();
  return c;
}

EnvConfig EnvConfig::cooperative_navigation(std::size_t agents) {
  EnvConfig c;
  c.scenario = Scenario::CooperativeNavigation;
  c.agents = agents;
  c.horizon = 25;
  return c;
}

EnvConfig EnvConfig::predator_prey(std::size_t predators) {
  EnvConfig c;
  c.scenario = Scenario::PredatorPrey;
  c.agents = predators;
  c.horizon = 25;
  return c;
}

}  // namespace stas::envs
