#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "stas/core/tape.hpp"
#include "stas/core/tensor.hpp"

namespace stas {

class BinaryReader;
class BinaryWriter;

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Rescale the update so the global gradient norm is at most this; 0 disables.
  double max_grad_norm = 0.0;
};

// Adaptive-moment state for a fixed parameter list.
struct OptimizerState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  static OptimizerState for_params(std::span<const Tensor> params, AdamConfig config);

  void save(BinaryWriter& out) const;
  void load(BinaryReader& in);
};

// One Adam update of `params` in place. Parameters without an entry in
// `grads` are treated as having zero gradient. Throws PoisonedUpdateError
// and leaves params and state untouched when any gradient is non-finite.
void optimizer_step(std::span<Tensor> params, const Gradients& grads, OptimizerState& state);

// Convenience owner of a parameter list and its optimizer state.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Tensor> params, AdamConfig config = {});

  void step(const Gradients& grads) { optimizer_step(params_, grads, state_); }

  const std::vector<Tensor>& params() const noexcept { return params_; }
  const OptimizerState& state() const noexcept { return state_; }
  OptimizerState& state() noexcept { return state_; }

 private:
  std::vector<Tensor> params_;
  OptimizerState state_;
};

}  // namespace stas
