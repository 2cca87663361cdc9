#include "stas/core/nn.hpp"

#include "stas/core/init.hpp"
#include "stas/core/ops.hpp"

namespace stas {

Linear::Linear(std::size_t in, std::size_t out, Rng& rng)
    : weight(xavier_uniform(in, out, rng)), bias(zero_param(Shape{out})) {}

Tensor Linear::operator()(Tape& tape, const Tensor& x) const {
  return add_row(tape, matmul(tape, x, weight), bias);
}

void Linear::collect(std::vector<Tensor>& params) const {
  params.push_back(weight);
  params.push_back(bias);
}

LayerNorm::LayerNorm(std::size_t width)
    : gain(Tensor::filled(Shape{width}, 1.0, true)), bias(zero_param(Shape{width})) {}

Tensor LayerNorm::operator()(Tape& tape, const Tensor& x) const {
  return layer_norm(tape, x, gain, bias);
}

void LayerNorm::collect(std::vector<Tensor>& params) const {
  params.push_back(gain);
  params.push_back(bias);
}

std::size_t parameter_count(const std::vector<Tensor>& params) {
  std::size_t n = 0;
  for (const Tensor& p : params) n += p.size();
  return n;
}

}  // namespace stas
