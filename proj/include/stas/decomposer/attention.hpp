#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "stas/core/ops.hpp"
#include "stas/core/tape.hpp"
#include "stas/core/tensor.hpp"

namespace stas::decomposer {

// Row order of a batch of episodes: (episode, t, agent). Episodes may differ
// in length; the agent count is shared.
class BatchLayout {
 public:
  BatchLayout() = default;
  BatchLayout(std::size_t agents, std::vector<std::size_t> lengths);

  std::size_t agents() const noexcept { return agents_; }
  std::size_t episodes() const noexcept { return lengths_.size(); }
  std::size_t length(std::size_t b) const { return lengths_[b]; }
  const std::vector<std::size_t>& lengths() const noexcept { return lengths_; }
  // Total (episode, t) pairs.
  std::size_t steps() const noexcept { return steps_; }
  std::size_t rows() const noexcept { return steps_ * agents_; }
  // Index of the first (episode b, t = 0) step.
  std::size_t step_offset(std::size_t b) const { return step_offset_[b]; }
  std::size_t row(std::size_t b, std::size_t t, std::size_t i) const {
    return (step_offset_[b] + t) * agents_ + i;
  }
  // Rows per episode, for segment sums.
  std::vector<std::size_t> rows_per_episode() const;

 private:
  std::size_t agents_ = 0;
  std::vector<std::size_t> lengths_;
  std::vector<std::size_t> step_offset_;
  std::size_t steps_ = 0;
};

// Coalition masks for the spatial attention, one per (step, focal agent,
// sample): bits[((step * N + focal) * K + k) * N + j].
struct SpatialMasks {
  std::size_t samples = 0;
  std::vector<unsigned char> bits;
};

// Multi-head causal self-attention along time, independently for every
// (episode, agent). q, k, v are [rows x d]; output is [rows x d] with heads
// concatenated. Scores are scaled by 1 / sqrt(d / heads).
Tensor temporal_attention(Tape& tape, const Tensor& q, const Tensor& k, const Tensor& v,
                          const BatchLayout& layout, std::size_t heads);

// Multi-head attention across agents within each step. Focal agent i attends
// under each of its K coalition masks; the K outputs are averaged.
Tensor spatial_attention(Tape& tape, const Tensor& q, const Tensor& k, const Tensor& v,
                         const BatchLayout& layout, std::size_t heads, const SpatialMasks& masks,
                         MaskMode mode);

// Inspection copies of the attention weights.
// Temporal: [episode][agent][head][t][t'] flattened per episode as
// weights[b][(i * heads + h) * T * T + t * T + t'], zero above the diagonal.
std::vector<std::vector<double>> temporal_attention_weights(const Tensor& q, const Tensor& k,
                                                            const BatchLayout& layout,
                                                            std::size_t heads);
// Spatial: [step][focal][sample][head][j] flattened.
std::vector<double> spatial_attention_weights(const Tensor& q, const Tensor& k,
                                              const BatchLayout& layout, std::size_t heads,
                                              const SpatialMasks& masks, MaskMode mode);

}  // namespace stas::decomposer
