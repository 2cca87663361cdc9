#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "stas/core/nn.hpp"
#include "stas/core/ops.hpp"
#include "stas/core/random.hpp"
#include "stas/core/tape.hpp"
#include "stas/core/tensor.hpp"
#include "stas/decomposer/attention.hpp"
#include "stas/envs/types.hpp"

namespace stas::decomposer {

enum class CoalitionSampling { Permutation, UniformSubset };
enum class PositionalEncoding { Learned, Sinusoidal };

const char* to_string(CoalitionSampling s);
CoalitionSampling coalition_sampling_from_string(const std::string& name);
const char* to_string(PositionalEncoding p);
PositionalEncoding positional_encoding_from_string(const std::string& name);

struct DecomposerConfig {
  std::size_t state_dim = 0;
  std::size_t action_count = 0;
  // Longest episode the positional table covers.
  std::size_t horizon = 64;
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t ff_width = 128;
  std::size_t layers = 1;
  std::size_t k_samples = 3;
  MaskMode mask_mode = MaskMode::NegInf;
  CoalitionSampling sampling = CoalitionSampling::Permutation;
  // Draw fresh coalitions for every step instead of one set per episode.
  bool resample_per_step = false;
  PositionalEncoding positional = PositionalEncoding::Learned;

  // Throws ConfigError naming the field.
  void validate() const;
  // Fields that determine the parameter layout.
  std::string describe_architecture() const;
  std::string architecture_hash() const;
};

// Agent-presence bits for focal agent `focal`; bits[focal] is always 1.
struct CoalitionMask {
  std::size_t focal = 0;
  std::vector<unsigned char> bits;
};

// K coalitions for `focal` among n agents. Permutation sampling takes the
// predecessors of `focal` in a uniformly random order, so subset sizes follow
// the Shapley weights; UniformSubset includes each other agent with
// probability 1/2.
std::vector<CoalitionMask> sample_coalitions(std::size_t n, std::size_t focal, std::size_t k,
                                             Rng& rng,
                                             CoalitionSampling law = CoalitionSampling::Permutation);

// The n! permutation-prefix coalitions of `focal`, one per join order.
std::vector<CoalitionMask> all_permutation_coalitions(std::size_t n, std::size_t focal);

// Expands per-focal coalition lists (same K for every focal agent) to every
// step of the layout.
SpatialMasks broadcast_masks(const BatchLayout& layout,
                             const std::vector<std::vector<CoalitionMask>>& per_focal);

// Credits Phi(i, t), row-major [t][i]. `total` is the model's return
// prediction, computed as the sum of the entries in row-major order.
struct CreditMatrix {
  std::size_t steps = 0;
  std::size_t agents = 0;
  std::vector<double> values;
  double total = 0.0;

  double at(std::size_t t, std::size_t i) const { return values[t * agents + i]; }
};

struct Forward {
  BatchLayout layout;
  Tensor credits;  // [rows x 1], rows in (episode, t, agent) order
  Tensor returns;  // [episodes x 1]
};

// Temporal block: pre-norm causal attention with output projection and a
// GELU feed-forward, both residual.
struct TemporalBlock {
  LayerNorm norm1, norm2;
  Tensor wq, wk, wv;
  Linear out, ff1, ff2;
};

// Spatial (Shapley) attention projections. Blocks below the top one also
// carry a residual feed-forward; the top block feeds the credit head.
struct SpatialBlock {
  Tensor wq, wk, wv;
  bool top = false;
  LayerNorm norm1, norm2;
  Linear ff1, ff2;
};

class Decomposer {
 public:
  Decomposer(DecomposerConfig config, std::uint64_t seed);

  const DecomposerConfig& config() const noexcept { return config_; }
  std::vector<Tensor> parameters() const;
  std::size_t parameter_count() const;

  // Plain inputs: concat(s, one-hot(u)) per row.
  Tensor features(std::span<const envs::Trajectory* const> batch, const BatchLayout& layout) const;

  // e = gelu(f(x)) + positional row. Throws ConfigError when an episode is
  // longer than the positional table.
  Tensor embed(Tape& tape, std::span<const envs::Trajectory* const> batch,
               const BatchLayout& layout) const;
  Tensor temporal(Tape& tape, const Tensor& x, const BatchLayout& layout, std::size_t layer) const;
  // Lower spatial block (residual); layer < layers - 1.
  Tensor spatial(Tape& tape, const Tensor& x, const BatchLayout& layout, std::size_t layer,
                 const SpatialMasks& masks) const;
  // Top block: masked attention averaged over samples, then the credit head.
  Tensor credit_head(Tape& tape, const Tensor& x, const BatchLayout& layout,
                     const SpatialMasks& masks) const;

  // Full pass with explicit masks.
  Forward forward(Tape& tape, std::span<const envs::Trajectory* const> batch,
                  const SpatialMasks& masks) const;
  // Full pass drawing k coalition samples per focal agent from rng.
  Forward forward(Tape& tape, std::span<const envs::Trajectory* const> batch, std::size_t k,
                  Rng& rng) const;

  SpatialMasks sample_masks(const BatchLayout& layout, std::size_t k, Rng& rng) const;

  // Per-step value v_i(C, t) from top-block context rows of one step
  // ([agents x d]), for an L = 1 style read-out.
  double marginal_contribution(const Tensor& context_step, const CoalitionMask& mask) const;
  double shapley_credit(const Tensor& context_step, std::size_t focal, std::size_t k,
                        Rng& rng) const;

  CreditMatrix predict_credits(const envs::Trajectory& trajectory, std::size_t k, Rng& rng) const;
  std::vector<CreditMatrix> predict_credits(std::span<const envs::Trajectory* const> batch,
                                            std::size_t k, Rng& rng) const;

  // Mean over the batch of (r_ep - sum of credits)^2. Throws ContractError
  // for an empty batch.
  Tensor decomposition_loss(Tape& tape, std::span<const envs::Trajectory* const> batch,
                            std::size_t k, Rng& rng) const;

  // Versioned binary checkpoint; load refuses a different architecture.
  void save(std::ostream& out) const;
  void load(std::istream& in);
  void save(const std::string& path) const;
  void load(const std::string& path);

  const std::vector<TemporalBlock>& temporal_blocks() const noexcept { return temporal_; }
  const std::vector<SpatialBlock>& spatial_blocks() const noexcept { return spatial_; }
  const Linear& head() const noexcept { return head_; }
  Linear& head() noexcept { return head_; }
  const Tensor& positional_table() const noexcept { return positional_; }

 private:
  DecomposerConfig config_;
  Linear input_;
  Tensor positional_;
  std::vector<TemporalBlock> temporal_;
  std::vector<SpatialBlock> spatial_;
  Linear head_;
};

// Everything needed to recompute the credit table of a batch from logged
// data: CSV rows episode,t,agent,credit.
void write_credit_csv(std::ostream& out, const std::vector<CreditMatrix>& credits,
                      std::size_t first_episode = 0);

}  // namespace stas::decomposer
