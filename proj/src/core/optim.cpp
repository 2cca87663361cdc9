#include "stas/core/optim.hpp"

#include <cmath>

#include "stas/core/errors.hpp"
#include "stas/core/serialize.hpp"

namespace stas {

OptimizerState OptimizerState::for_params(std::span<const Tensor> params, AdamConfig config) {
  OptimizerState s;
  s.config = config;
  for (const Tensor& p : params) {
    s.first_moment.emplace_back(p.size(), 0.0);
    s.second_moment.emplace_back(p.size(), 0.0);
  }
  return s;
}

void OptimizerState::save(BinaryWriter& out) const {
  out.f64(config.learning_rate);
  out.f64(config.beta1);
  out.f64(config.beta2);
  out.f64(config.epsilon);
  out.f64(config.max_grad_norm);
  out.u64(step);
  out.u64(first_moment.size());
  for (std::size_t i = 0; i < first_moment.size(); ++i) {
    out.f64s(first_moment[i]);
    out.f64s(second_moment[i]);
  }
}

void OptimizerState::load(BinaryReader& in) {
  config.learning_rate = in.f64();
  config.beta1 = in.f64();
  config.beta2 = in.f64();
  config.epsilon = in.f64();
  config.max_grad_norm = in.f64();
  step = in.u64();
  const std::uint64_t n = in.u64();
  first_moment.assign(n, {});
  second_moment.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    first_moment[i] = in.f64s();
    second_moment[i] = in.f64s();
  }
}

void optimizer_step(std::span<Tensor> params, const Gradients& grads, OptimizerState& state) {
  if (state.first_moment.size() != params.size()) {
    throw ContractError("optimizer state tracks " + std::to_string(state.first_moment.size()) +
                        " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.first_moment[i].size() != params[i].size()) {
      throw DimensionError("optimizer moment shape does not match parameter " + std::to_string(i));
    }
    if (!grads.has(params[i])) continue;
    auto g = grads.of(params[i]);
    if (g.size() != params[i].size()) {
      throw DimensionError("gradient shape does not match parameter " + std::to_string(i));
    }
    for (double v : g) {
      if (!std::isfinite(v)) {
        throw PoisonedUpdateError("non-finite gradient for parameter " + std::to_string(i) +
                                  "; update refused");
      }
    }
  }

  const AdamConfig& c = state.config;
  double clip = 1.0;
  if (c.max_grad_norm > 0.0) {
    const double norm = std::sqrt(grads.squared_norm(params));
    if (norm > c.max_grad_norm) clip = c.max_grad_norm / norm;
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    auto p = params[i].mutable_data();
    const bool has = grads.has(params[i]);
    std::span<const double> g = has ? grads.of(params[i]) : std::span<const double>{};
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = has ? g[k] * clip : 0.0;
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * gk;
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * gk * gk;
      const double mhat = m[k] / bias1;
      const double vhat = v[k] / bias2;
      p[k] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon);
    }
  }
}

Adam::Adam(std::vector<Tensor> params, AdamConfig config)
    : params_(std::move(params)), state_(OptimizerState::for_params(params_, config)) {}

}  // namespace stas
