#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "stas/core/random.hpp"
#include "stas/envs/config.hpp"
#include "stas/envs/layout.hpp"
#include "stas/envs/types.hpp"

namespace stas::envs {

struct StepResult {
  JointState state;
  double hidden_reward = 0.0;
  bool done = false;
};

// Single-threaded; separate instances are independent.
class Environment {
 public:
  explicit Environment(EnvConfig config);
  virtual ~Environment() = default;

  const JointState& reset(std::uint64_t seed);
  // Throws LifecycleError before reset or after done, ValidationError on a
  // malformed joint action.
  StepResult step(const JointAction& actions);

  const EnvConfig& config() const noexcept { return config_; }
  const JointState& state() const noexcept { return state_; }
  std::size_t agents() const noexcept { return config_.agents; }
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t action_count() const = 0;
  std::size_t t() const noexcept { return t_; }
  bool done() const noexcept { return done_; }
  bool success() const noexcept { return success_; }

 protected:
  virtual void do_reset(Rng& rng) = 0;
  // Applies the transition and returns the hidden reward r(s_t, u_t).
  virtual double do_step(const JointAction& actions) = 0;
  virtual void write_state(JointState& out) const = 0;
  // Goal met: ends the episode early.
  virtual bool terminal() const { return false; }
  // Scenario success flag, evaluated whenever the episode ends.
  virtual bool evaluate_success() const = 0;

  EnvConfig config_;

 private:
  JointState state_;
  std::size_t t_ = 0;
  bool started_ = false;
  bool done_ = false;
  bool success_ = false;
};

class AliceBobEnv final : public Environment {
 public:
  static constexpr std::size_t kActions = 4;  // up, down, left, right
  static constexpr std::size_t kStateDim = 4;  // x, y, door-A open, door-B open

  explicit AliceBobEnv(EnvConfig config);

  std::size_t state_dim() const override { return kStateDim; }
  std::size_t action_count() const override { return kActions; }

  const GridLayout& layout() const noexcept { return layout_; }
  Cell position(std::size_t agent) const { return pos_.at(agent); }
  bool door_a_open() const noexcept { return door_open_[0]; }
  bool door_b_open() const noexcept { return door_open_[1]; }
  bool arrived(std::size_t agent) const { return arrived_.at(agent); }

 private:
  void do_reset(Rng& rng) override;
  double do_step(const JointAction& actions) override;
  void write_state(JointState& out) const override;
  bool terminal() const override;
  bool evaluate_success() const override { return terminal(); }

  GridLayout layout_;
  std::array<Cell, 2> pos_{};
  std::array<bool, 2> arrived_{};
  std::array<bool, 2> door_open_{};
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// no-op, up, down, left, right
inline constexpr std::array<Vec2, 5> kThrustDirections = {
    Vec2{0, 0}, Vec2{0, 1}, Vec2{0, -1}, Vec2{-1, 0}, Vec2{1, 0}};

double distance(Vec2 a, Vec2 b);

// One kinematic step inside the unit square: v <- damping v + thrust dir,
// p <- clip(p + v); a clipped axis loses its velocity.
void integrate(Vec2& pos, Vec2& vel, int action, double damping, double thrust);

// Greedy evader: the action whose one-step position is farthest from the
// nearest predator (predators held at their current positions). Ties go to
// the lowest action index.
int prey_policy(Vec2 prey_pos, Vec2 prey_vel, std::span<const Vec2> predators,
                const ParticleParams& params);

class ParticleEnv : public Environment {
 public:
  static constexpr std::size_t kActions = 5;

  explicit ParticleEnv(EnvConfig config);
  std::size_t action_count() const override { return kActions; }

  Vec2 position(std::size_t agent) const { return pos_.at(agent); }
  Vec2 velocity(std::size_t agent) const { return vel_.at(agent); }

 protected:
  void move_agents(const JointAction& actions);

  std::vector<Vec2> pos_;
  std::vector<Vec2> vel_;
};

// State per agent: [px, py, vx, vy, landmark offsets..., other-agent offsets...].
class CooperativeNavigationEnv final : public ParticleEnv {
 public:
  explicit CooperativeNavigationEnv(EnvConfig config);
  std::size_t state_dim() const override;
  const std::vector<Vec2>& landmarks() const noexcept { return landmarks_; }

 private:
  void do_reset(Rng& rng) override;
  double do_step(const JointAction& actions) override;
  void write_state(JointState& out) const override;
  bool evaluate_success() const override;

  std::vector<Vec2> landmarks_;
};

// Predators are the learning agents. State per predator:
// [px, py, vx, vy, prey offsets..., other-predator offsets...].
class PredatorPreyEnv final : public ParticleEnv {
 public:
  explicit PredatorPreyEnv(EnvConfig config);
  std::size_t state_dim() const override;
  const std::vector<Vec2>& prey() const noexcept { return prey_pos_; }
  std::size_t captures() const noexcept { return captures_; }

 private:
  void do_reset(Rng& rng) override;
  double do_step(const JointAction& actions) override;
  void write_state(JointState& out) const override;
  bool evaluate_success() const override { return captures_ > 0; }

  std::vector<Vec2> prey_pos_;
  std::vector<Vec2> prey_vel_;
  std::size_t captures_ = 0;
};

std::unique_ptr<Environment> make_environment(const EnvConfig& config);

}  // namespace stas::envs
