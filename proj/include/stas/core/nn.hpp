#pragma once

#include <cstddef>
#include <vector>

#include "stas/core/random.hpp"
#include "stas/core/tape.hpp"
#include "stas/core/tensor.hpp"

namespace stas {

// Affine map x W + b over the rows of x.
struct Linear {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]

  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng);

  Tensor operator()(Tape& tape, const Tensor& x) const;
  void collect(std::vector<Tensor>& params) const;
  std::size_t in() const { return weight.rows(); }
  std::size_t out() const { return weight.cols(); }
};

// Learned gain and bias for layer_norm.
struct LayerNorm {
  Tensor gain;
  Tensor bias;

  LayerNorm() = default;
  explicit LayerNorm(std::size_t width);

  Tensor operator()(Tape& tape, const Tensor& x) const;
  void collect(std::vector<Tensor>& params) const;
};

std::size_t parameter_count(const std::vector<Tensor>& params);

}  // namespace stas
