#include "stas/envs/environment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stas/core/errors.hpp"

namespace stas::envs {

Environment::Environment(EnvConfig config) : config_(std::move(config)) { config_.validate(); }

const JointState& Environment::reset(std::uint64_t seed) {
  Rng rng(seed);
  do_reset(rng);
  state_ = JointState(agents(), state_dim());
  write_state(state_);
  t_ = 0;
  started_ = true;
  done_ = false;
  success_ = false;
  return state_;
}

StepResult Environment::step(const JointAction& actions) {
  if (!started_) throw LifecycleError("step before reset");
  if (done_) throw LifecycleError("step after the episode ended");
  if (actions.size() != agents()) {
    throw ValidationError("joint action has " + std::to_string(actions.size()) +
                          " entries for " + std::to_string(agents()) + " agents");
  }
  for (int a : actions) {
    if (a < 0 || static_cast<std::size_t>(a) >= action_count()) {
      throw ValidationError("action index " + std::to_string(a) + " out of range");
    }
  }
  StepResult out;
  out.hidden_reward = do_step(actions);
  ++t_;
  write_state(state_);
  done_ = terminal() || t_ >= config_.horizon;
  if (done_) success_ = evaluate_success();
  out.state = state_;
  out.done = done_;
  return out;
}

// ---------------------------------------------------------------- Alice & Bob

AliceBobEnv::AliceBobEnv(EnvConfig config)
    : Environment(std::move(config)),
      layout_(GridLayout::parse(config_.alice_bob.layout.empty() ? default_layout_text()
                                                                 : config_.alice_bob.layout)) {}

void AliceBobEnv::do_reset(Rng&) {
  pos_ = {layout_.spawn_a(), layout_.spawn_b()};
  arrived_ = {false, false};
  door_open_ = {false, false};
}

double AliceBobEnv::do_step(const JointAction& actions) {
  constexpr std::array<Cell, 4> kMoves{Cell{0, -1}, Cell{0, 1}, Cell{-1, 0}, Cell{1, 0}};
  double reward = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    if (arrived_[i]) continue;
    const Cell d = kMoves[static_cast<std::size_t>(actions[i])];
    const Cell next{pos_[i].x + d.x, pos_[i].y + d.y};
    if (!layout_.passable(next, door_open_[0], door_open_[1])) {
      reward += config_.alice_bob.wall_penalty;
      continue;
    }
    pos_[i] = next;
  }
  for (const Cell p : pos_) {
    if (p == layout_.key_a()) door_open_[0] = true;
    if (p == layout_.key_b()) door_open_[1] = true;
  }
  if (door_open_[0] && door_open_[1]) {
    for (std::size_t i = 0; i < 2; ++i) {
      if (pos_[i] == layout_.treasure()) arrived_[i] = true;
    }
  }
  if (terminal()) reward += config_.alice_bob.treasure_bonus;
  return reward;
}

bool AliceBobEnv::terminal() const { return arrived_[0] && arrived_[1]; }

void AliceBobEnv::write_state(JointState& out) const {
  const double sx = layout_.width() > 1 ? 1.0 / (layout_.width() - 1) : 0.0;
  const double sy = layout_.height() > 1 ? 1.0 / (layout_.height() - 1) : 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    auto s = out.agent(i);
    s[0] = pos_[i].x * sx;
    s[1] = pos_[i].y * sy;
    s[2] = door_open_[0] ? 1.0 : 0.0;
    s[3] = door_open_[1] ? 1.0 : 0.0;
  }
}

// ------------------------------------------------------------ particle worlds

double distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

void integrate(Vec2& pos, Vec2& vel, int action, double damping, double thrust) {
  const Vec2 dir = kThrustDirections[static_cast<std::size_t>(action)];
  vel.x = damping * vel.x + thrust * dir.x;
  vel.y = damping * vel.y + thrust * dir.y;
  pos.x += vel.x;
  pos.y += vel.y;
  if (pos.x < 0.0 || pos.x > 1.0) {
    pos.x = std::clamp(pos.x, 0.0, 1.0);
    vel.x = 0.0;
  }
  if (pos.y < 0.0 || pos.y > 1.0) {
    pos.y = std::clamp(pos.y, 0.0, 1.0);
    vel.y = 0.0;
  }
}

int prey_policy(Vec2 prey_pos, Vec2 prey_vel, std::span<const Vec2> predators,
                const ParticleParams& params) {
  int best = 0;
  double best_d = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < static_cast<int>(kThrustDirections.size()); ++a) {
    Vec2 p = prey_pos;
    Vec2 v = prey_vel;
    integrate(p, v, a, params.damping, params.prey_thrust);
    double nearest = std::numeric_limits<double>::infinity();
    for (const Vec2& q : predators) nearest = std::min(nearest, distance(p, q));
    if (nearest > best_d) {
      best_d = nearest;
      best = a;
    }
  }
  return best;
}

ParticleEnv::ParticleEnv(EnvConfig config) : Environment(std::move(config)) {}

void ParticleEnv::move_agents(const JointAction& actions) {
  for (std::size_t i = 0; i < pos_.size(); ++i) {
    integrate(pos_[i], vel_[i], actions[i], config_.particle.damping, config_.particle.thrust);
  }
}

namespace {

Vec2 random_point(Rng& rng, double margin) {
  const double x = rng.uniform(margin, 1.0 - margin);
  const double y = rng.uniform(margin, 1.0 - margin);
  return {x, y};
}

}  // namespace

CooperativeNavigationEnv::CooperativeNavigationEnv(EnvConfig config)
    : ParticleEnv(std::move(config)) {}

std::size_t CooperativeNavigationEnv::state_dim() const {
  const std::size_t l = config_.particle.landmarks ? config_.particle.landmarks : agents();
  return 4 + 2 * l + 2 * (agents() - 1);
}

void CooperativeNavigationEnv::do_reset(Rng& rng) {
  const std::size_t l = config_.particle.landmarks ? config_.particle.landmarks : agents();
  pos_.assign(agents(), {});
  vel_.assign(agents(), {});
  landmarks_.assign(l, {});
  for (Vec2& p : pos_) p = random_point(rng, 0.05);
  for (Vec2& p : landmarks_) p = random_point(rng, 0.1);
}

double CooperativeNavigationEnv::do_step(const JointAction& actions) {
  // r(s_t): scored on the state before the move.
  double reward = 0.0;
  for (const Vec2& l : landmarks_) {
    double nearest = std::numeric_limits<double>::infinity();
    for (const Vec2& p : pos_) nearest = std::min(nearest, distance(p, l));
    reward -= nearest;
  }
  for (std::size_t i = 0; i < pos_.size(); ++i) {
    for (std::size_t j = i + 1; j < pos_.size(); ++j) {
      if (distance(pos_[i], pos_[j]) < 2.0 * config_.particle.agent_radius) {
        reward -= config_.particle.collision_penalty;
      }
    }
  }
  move_agents(actions);
  return reward;
}

void CooperativeNavigationEnv::write_state(JointState& out) const {
  for (std::size_t i = 0; i < agents(); ++i) {
    auto s = out.agent(i);
    std::size_t k = 0;
    s[k++] = pos_[i].x;
    s[k++] = pos_[i].y;
    s[k++] = vel_[i].x;
    s[k++] = vel_[i].y;
    for (const Vec2& l : landmarks_) {
      s[k++] = l.x - pos_[i].x;
      s[k++] = l.y - pos_[i].y;
    }
    for (std::size_t j = 0; j < agents(); ++j) {
      if (j == i) continue;
      s[k++] = pos_[j].x - pos_[i].x;
      s[k++] = pos_[j].y - pos_[i].y;
    }
  }
}

bool CooperativeNavigationEnv::evaluate_success() const {
  for (const Vec2& l : landmarks_) {
    bool covered = false;
    for (const Vec2& p : pos_) covered = covered || distance(p, l) < config_.particle.cover_radius;
    if (!covered) return false;
  }
  return true;
}

PredatorPreyEnv::PredatorPreyEnv(EnvConfig config) : ParticleEnv(std::move(config)) {}

std::size_t PredatorPreyEnv::state_dim() const {
  return 4 + 2 * config_.particle.preys + 2 * (agents() - 1);
}

void PredatorPreyEnv::do_reset(Rng& rng) {
  pos_.assign(agents(), {});
  vel_.assign(agents(), {});
  prey_pos_.assign(config_.particle.preys, {});
  prey_vel_.assign(config_.particle.preys, {});
  for (Vec2& p : pos_) p = random_point(rng, 0.05);
  for (Vec2& p : prey_pos_) p = random_point(rng, 0.05);
  captures_ = 0;
}

double PredatorPreyEnv::do_step(const JointAction& actions) {
  const ParticleParams& pp = config_.particle;
  double reward = 0.0;
  double distance_sum = 0.0;
  for (const Vec2& p : pos_) {
    double nearest = std::numeric_limits<double>::infinity();
    for (const Vec2& q : prey_pos_) {
      const double d = distance(p, q);
      nearest = std::min(nearest, d);
      if (d < pp.capture_radius) {
        reward += pp.capture_bonus;
        ++captures_;
      }
    }
    distance_sum += nearest;
  }
  reward -= pp.distance_penalty * distance_sum / static_cast<double>(pos_.size());

  // Prey decide on the pre-move predator positions, then everyone moves.
  std::vector<int> prey_actions(prey_pos_.size());
  for (std::size_t m = 0; m < prey_pos_.size(); ++m) {
    prey_actions[m] = prey_policy(prey_pos_[m], prey_vel_[m], pos_, pp);
  }
  move_agents(actions);
  for (std::size_t m = 0; m < prey_pos_.size(); ++m) {
    integrate(prey_pos_[m], prey_vel_[m], prey_actions[m], pp.damping, pp.prey_thrust);
  }
  return reward;
}

void PredatorPreyEnv::write_state(JointState& out) const {
  for (std::size_t i = 0; i < agents(); ++i) {
    auto s = out.agent(i);
    std::size_t k = 0;
    s[k++] = pos_[i].x;
    s[k++] = pos_[i].y;
    s[k++] = vel_[i].x;
    s[k++] = vel_[i].y;
    for (const Vec2& q : prey_pos_) {
      s[k++] = q.x - pos_[i].x;
      s[k++] = q.y - pos_[i].y;
    }
    for (std::size_t j = 0; j < agents(); ++j) {
      if (j == i) continue;
      s[k++] = pos_[j].x - pos_[i].x;
      s[k++] = pos_[j].y - pos_[i].y;
    }
  }
}

std::unique_ptr<Environment> make_environment(const EnvConfig& config) {
  switch (config.scenario) {
    case Scenario::AliceBob: return std::make_unique<AliceBobEnv>(config);
    case Scenario::CooperativeNavigation:
      return std::make_unique<CooperativeNavigationEnv>(config);
    case Scenario::PredatorPrey: return std::make_unique<PredatorPreyEnv>(config);
  }
  throw ConfigError("env.scenario", "unknown scenario");
}

}  // namespace stas::envs
