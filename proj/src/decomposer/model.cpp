#include "stas/decomposer/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "stas/core/errors.hpp"
#include "stas/core/init.hpp"
#include "stas/core/serialize.hpp"

namespace stas::decomposer {

const char* to_string(CoalitionSampling s) {
  return s == CoalitionSampling::Permutation ? "permutation" : "uniform_subset";
}

CoalitionSampling coalition_sampling_from_string(const std::string& name) {
  if (name == "permutation") return CoalitionSampling::Permutation;
  if (name == "uniform_subset") return CoalitionSampling::UniformSubset;
  throw ConfigError("decomposer.sampling", "unknown coalition sampling '" + name + "'");
}

const char* to_string(PositionalEncoding p) {
  return p == PositionalEncoding::Learned ? "learned" : "sinusoidal";
}

PositionalEncoding positional_encoding_from_string(const std::string& name) {
  if (name == "learned") return PositionalEncoding::Learned;
  if (name == "sinusoidal") return PositionalEncoding::Sinusoidal;
  throw ConfigError("decomposer.positional", "unknown positional encoding '" + name + "'");
}

void DecomposerConfig::validate() const {
  if (state_dim == 0) throw ConfigError("decomposer.state_dim", "must be positive");
  if (action_count == 0) throw ConfigError("decomposer.action_count", "must be positive");
  if (horizon == 0) throw ConfigError("decomposer.horizon", "must be positive");
  if (d_model == 0) throw ConfigError("decomposer.d_model", "must be positive");
  if (heads == 0 || d_model % heads != 0) {
    throw ConfigError("decomposer.heads", "must divide d_model");
  }
  if (ff_width == 0) throw ConfigError("decomposer.ff_width", "must be positive");
  if (layers < 1) throw ConfigError("decomposer.layers", "need at least one layer");
  if (k_samples < 1) throw ConfigError("decomposer.k_samples", "need at least one sample");
}

std::string DecomposerConfig::describe_architecture() const {
  std::ostringstream s;
  s << "state_dim=" << state_dim << ";action_count=" << action_count << ";horizon=" << horizon
    << ";d_model=" << d_model << ";heads=" << heads << ";ff_width=" << ff_width
    << ";layers=" << layers << ";positional=" << to_string(positional);
  return s.str();
}

std::string DecomposerConfig::architecture_hash() const {
  return hex64(fnv1a64(describe_architecture()));
}

// ------------------------------------------------------------------ masks

std::vector<CoalitionMask> sample_coalitions(std::size_t n, std::size_t focal, std::size_t k,
                                             Rng& rng, CoalitionSampling law) {
  if (n == 0 || k == 0) throw ContractError("sample_coalitions: need n >= 1 and K >= 1");
  if (focal >= n) throw ContractError("sample_coalitions: focal agent out of range");
  std::vector<CoalitionMask> out(k);
  std::vector<std::size_t> order(n);
  for (CoalitionMask& m : out) {
    m.focal = focal;
    m.bits.assign(n, 0);
    if (law == CoalitionSampling::Permutation) {
      std::iota(order.begin(), order.end(), 0);
      for (std::size_t a = n - 1; a > 0; --a) std::swap(order[a], order[rng.uniform_int(a + 1)]);
      for (std::size_t j : order) {
        if (j == focal) break;
        m.bits[j] = 1;
      }
    } else {
      for (std::size_t j = 0; j < n; ++j) {
        if (j != focal) m.bits[j] = rng.uniform() < 0.5 ? 1 : 0;
      }
    }
    m.bits[focal] = 1;
  }
  return out;
}

std::vector<CoalitionMask> all_permutation_coalitions(std::size_t n, std::size_t focal) {
  if (focal >= n) throw ContractError("all_permutation_coalitions: focal agent out of range");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<CoalitionMask> out;
  do {
    CoalitionMask m{focal, std::vector<unsigned char>(n, 0)};
    for (std::size_t j : order) {
      if (j == focal) break;
      m.bits[j] = 1;
    }
    m.bits[focal] = 1;
    out.push_back(std::move(m));
  } while (std::next_permutation(order.begin(), order.end()));
  return out;
}

SpatialMasks broadcast_masks(const BatchLayout& layout,
                             const std::vector<std::vector<CoalitionMask>>& per_focal) {
  const std::size_t n = layout.agents();
  if (per_focal.size() != n || per_focal.empty()) {
    throw ContractError("broadcast_masks: one coalition list per agent required");
  }
  const std::size_t k = per_focal[0].size();
  SpatialMasks m;
  m.samples = k;
  m.bits.resize(layout.steps() * n * k * n);
  for (std::size_t st = 0; st < layout.steps(); ++st)
    for (std::size_t i = 0; i < n; ++i) {
      if (per_focal[i].size() != k) throw ContractError("broadcast_masks: ragged sample counts");
      for (std::size_t s = 0; s < k; ++s) {
        const auto& bits = per_focal[i][s].bits;
        if (bits.size() != n) throw DimensionError("broadcast_masks: mask length differs from N");
        std::copy(bits.begin(), bits.end(), m.bits.begin() + ((st * n + i) * k + s) * n);
      }
    }
  return m;
}

// ------------------------------------------------------------------ model

namespace {

Tensor square_param(std::size_t d, Rng& rng) { return xavier_uniform(d, d, rng); }

Tensor sinusoidal_table(std::size_t rows, std::size_t d) {
  std::vector<double> v(rows * d);
  for (std::size_t t = 0; t < rows; ++t)
    for (std::size_t c = 0; c < d; ++c) {
      const double freq = std::pow(10000.0, -static_cast<double>(c - c % 2) / static_cast<double>(d));
      v[t * d + c] = c % 2 == 0 ? std::sin(t * freq) : std::cos(t * freq);
    }
  return Tensor(Shape{rows, d}, std::move(v), false);
}

Tensor feed_forward(Tape& tape, const Linear& ff1, const Linear& ff2, const Tensor& x) {
  return ff2(tape, gelu(tape, ff1(tape, x)));
}

}  // namespace

Decomposer::Decomposer(DecomposerConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  const std::size_t d = config_.d_model;
  input_ = Linear(config_.state_dim + config_.action_count, d, rng);
  if (config_.positional == PositionalEncoding::Learned) {
    std::vector<double> v(config_.horizon * d);
    for (double& x : v) x = rng.uniform(-0.05, 0.05);
    positional_ = Tensor(Shape{config_.horizon, d}, std::move(v), true);
  } else {
    positional_ = sinusoidal_table(config_.horizon, d);
  }
  for (std::size_t l = 0; l < config_.layers; ++l) {
    TemporalBlock tb;
    tb.norm1 = LayerNorm(d);
    tb.wq = square_param(d, rng);
    tb.wk = square_param(d, rng);
    tb.wv = square_param(d, rng);
    tb.out = Linear(d, d, rng);
    tb.norm2 = LayerNorm(d);
    tb.ff1 = Linear(d, config_.ff_width, rng);
    tb.ff2 = Linear(config_.ff_width, d, rng);
    temporal_.push_back(std::move(tb));

    SpatialBlock sb;
    sb.top = l + 1 == config_.layers;
    if (!sb.top) sb.norm1 = LayerNorm(d);
    sb.wq = square_param(d, rng);
    sb.wk = square_param(d, rng);
    sb.wv = square_param(d, rng);
    if (!sb.top) {
      sb.norm2 = LayerNorm(d);
      sb.ff1 = Linear(d, config_.ff_width, rng);
      sb.ff2 = Linear(config_.ff_width, d, rng);
    }
    spatial_.push_back(std::move(sb));
  }
  head_ = Linear(d, 1, rng);
}

std::vector<Tensor> Decomposer::parameters() const {
  std::vector<Tensor> p;
  input_.collect(p);
  if (config_.positional == PositionalEncoding::Learned) p.push_back(positional_);
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const TemporalBlock& tb = temporal_[l];
    tb.norm1.collect(p);
    p.push_back(tb.wq);
    p.push_back(tb.wk);
    p.push_back(tb.wv);
    tb.out.collect(p);
    tb.norm2.collect(p);
    tb.ff1.collect(p);
    tb.ff2.collect(p);
    const SpatialBlock& sb = spatial_[l];
    if (!sb.top) sb.norm1.collect(p);
    p.push_back(sb.wq);
    p.push_back(sb.wk);
    p.push_back(sb.wv);
    if (!sb.top) {
      sb.norm2.collect(p);
      sb.ff1.collect(p);
      sb.ff2.collect(p);
    }
  }
  head_.collect(p);
  return p;
}

std::size_t Decomposer::parameter_count() const { return stas::parameter_count(parameters()); }

namespace {

BatchLayout layout_of(std::span<const envs::Trajectory* const> batch) {
  if (batch.empty()) throw ContractError("decomposer: empty batch");
  const std::size_t n = batch[0]->agents;
  std::vector<std::size_t> lengths;
  lengths.reserve(batch.size());
  for (const envs::Trajectory* tr : batch) {
    if (tr->agents != n) throw ContractError("decomposer: batch mixes agent counts");
    if (tr->length() == 0) throw ContractError("decomposer: empty trajectory");
    if (tr->states.size() != tr->length() * tr->agents * tr->state_dim) {
      throw ContractError("decomposer: malformed trajectory");
    }
    lengths.push_back(tr->length());
  }
  return BatchLayout(n, std::move(lengths));
}

}  // namespace

Tensor Decomposer::features(std::span<const envs::Trajectory* const> batch,
                            const BatchLayout& layout) const {
  const std::size_t s = config_.state_dim, a = config_.action_count, w = s + a;
  std::vector<double> x(layout.rows() * w, 0.0);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const envs::Trajectory& tr = *batch[b];
    if (tr.state_dim != s || tr.action_count != a) {
      throw DimensionError("decomposer: trajectory dimensions differ from the model's");
    }
    if (tr.length() > config_.horizon) {
      throw ConfigError("decomposer.horizon", "episode of length " + std::to_string(tr.length()) +
                                                  " exceeds the positional table");
    }
    for (std::size_t t = 0; t < tr.length(); ++t)
      for (std::size_t i = 0; i < tr.agents; ++i) {
        double* row = x.data() + layout.row(b, t, i) * w;
        auto st = tr.state(t, i);
        std::copy(st.begin(), st.end(), row);
        row[s + static_cast<std::size_t>(tr.action(t, i))] = 1.0;
      }
  }
  return Tensor(Shape{layout.rows(), w}, std::move(x), false);
}

Tensor Decomposer::embed(Tape& tape, std::span<const envs::Trajectory* const> batch,
                         const BatchLayout& layout) const {
  const Tensor x = features(batch, layout);
  std::vector<std::size_t> t_index(layout.rows());
  for (std::size_t b = 0; b < layout.episodes(); ++b)
    for (std::size_t t = 0; t < layout.length(b); ++t)
      for (std::size_t i = 0; i < layout.agents(); ++i) t_index[layout.row(b, t, i)] = t;
  const Tensor h = gelu(tape, input_(tape, x));
  return add(tape, h, gather_rows(tape, positional_, t_index));
}

Tensor Decomposer::temporal(Tape& tape, const Tensor& x, const BatchLayout& layout,
                            std::size_t layer) const {
  const TemporalBlock& tb = temporal_.at(layer);
  const Tensor h = tb.norm1(tape, x);
  const Tensor a = temporal_attention(tape, matmul(tape, h, tb.wq), matmul(tape, h, tb.wk),
                                      matmul(tape, h, tb.wv), layout, config_.heads);
  const Tensor y = add(tape, x, tb.out(tape, a));
  return add(tape, y, feed_forward(tape, tb.ff1, tb.ff2, tb.norm2(tape, y)));
}

Tensor Decomposer::spatial(Tape& tape, const Tensor& x, const BatchLayout& layout,
                           std::size_t layer, const SpatialMasks& masks) const {
  const SpatialBlock& sb = spatial_.at(layer);
  if (sb.top) throw ContractError("spatial: the top block feeds the credit head");
  const Tensor h = sb.norm1(tape, x);
  const Tensor a =
      spatial_attention(tape, matmul(tape, h, sb.wq), matmul(tape, h, sb.wk),
                        matmul(tape, h, sb.wv), layout, config_.heads, masks, config_.mask_mode);
  const Tensor y = add(tape, x, a);
  return add(tape, y, feed_forward(tape, sb.ff1, sb.ff2, sb.norm2(tape, y)));
}

Tensor Decomposer::credit_head(Tape& tape, const Tensor& x, const BatchLayout& layout,
                               const SpatialMasks& masks) const {
  const SpatialBlock& sb = spatial_.back();
  const Tensor a =
      spatial_attention(tape, matmul(tape, x, sb.wq), matmul(tape, x, sb.wk),
                        matmul(tape, x, sb.wv), layout, config_.heads, masks, config_.mask_mode);
  // The head is affine, so head(mean_k a_k) = mean_k head(a_k).
  return head_(tape, a);
}

Forward Decomposer::forward(Tape& tape, std::span<const envs::Trajectory* const> batch,
                            const SpatialMasks& masks) const {
  Forward f;
  f.layout = layout_of(batch);
  Tensor x = embed(tape, batch, f.layout);
  for (std::size_t l = 0; l < config_.layers; ++l) {
    x = temporal(tape, x, f.layout, l);
    if (l + 1 < config_.layers) x = spatial(tape, x, f.layout, l, masks);
  }
  f.credits = credit_head(tape, x, f.layout, masks);
  const auto seg = f.layout.rows_per_episode();
  f.returns = segment_sum(tape, f.credits, seg);
  return f;
}

Forward Decomposer::forward(Tape& tape, std::span<const envs::Trajectory* const> batch,
                            std::size_t k, Rng& rng) const {
  const BatchLayout layout = layout_of(batch);
  return forward(tape, batch, sample_masks(layout, k, rng));
}

SpatialMasks Decomposer::sample_masks(const BatchLayout& layout, std::size_t k, Rng& rng) const {
  if (k == 0) throw ContractError("sample_masks: K must be at least 1");
  const std::size_t n = layout.agents();
  SpatialMasks m;
  m.samples = k;
  m.bits.resize(layout.steps() * n * k * n);
  auto fill = [&](std::size_t st, std::size_t i, const std::vector<CoalitionMask>& cs) {
    for (std::size_t s = 0; s < k; ++s) {
      std::copy(cs[s].bits.begin(), cs[s].bits.end(), m.bits.begin() + ((st * n + i) * k + s) * n);
    }
  };
  for (std::size_t b = 0; b < layout.episodes(); ++b) {
    const std::size_t first = layout.step_offset(b);
    if (config_.resample_per_step) {
      for (std::size_t t = 0; t < layout.length(b); ++t)
        for (std::size_t i = 0; i < n; ++i)
          fill(first + t, i, sample_coalitions(n, i, k, rng, config_.sampling));
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        const auto cs = sample_coalitions(n, i, k, rng, config_.sampling);
        for (std::size_t t = 0; t < layout.length(b); ++t) fill(first + t, i, cs);
      }
    }
  }
  return m;
}

double Decomposer::marginal_contribution(const Tensor& context_step,
                                         const CoalitionMask& mask) const {
  const std::size_t n = context_step.rows();
  if (mask.bits.size() != n || mask.focal >= n) {
    throw DimensionError("marginal_contribution: mask does not match the step's agents");
  }
  if (mask.bits[mask.focal] != 1) {
    throw ValidationError("marginal_contribution: mask must include its focal agent");
  }
  Tape tape = Tape::inference();
  const SpatialBlock& sb = spatial_.back();
  const Tensor q = matmul(tape, context_step, sb.wq);
  const Tensor k = matmul(tape, context_step, sb.wk);
  const Tensor v = matmul(tape, context_step, sb.wv);
  const std::size_t d = config_.d_model, dh = d / config_.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<double> out(d, 0.0), logits(n), w(n);
  for (std::size_t h = 0; h < config_.heads; ++h) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < dh; ++c) s += q.at(mask.focal, h * dh + c) * k.at(j, h * dh + c);
      logits[j] = scale * s;
    }
    softmax_row(logits, mask.bits.data(), config_.mask_mode, w);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t c = 0; c < dh; ++c) out[h * dh + c] += w[j] * v.at(j, h * dh + c);
  }
  double value = head_.bias[0];
  for (std::size_t c = 0; c < d; ++c) value += out[c] * head_.weight[c];
  return value;
}

double Decomposer::shapley_credit(const Tensor& context_step, std::size_t focal, std::size_t k,
                                  Rng& rng) const {
  const auto cs = sample_coalitions(context_step.rows(), focal, k, rng, config_.sampling);
  double total = 0.0;
  for (const CoalitionMask& m : cs) total += marginal_contribution(context_step, m);
  return total / static_cast<double>(k);
}

std::vector<CreditMatrix> Decomposer::predict_credits(
    std::span<const envs::Trajectory* const> batch, std::size_t k, Rng& rng) const {
  Tape tape = Tape::inference();
  const Forward f = forward(tape, batch, k, rng);
  std::vector<CreditMatrix> out(batch.size());
  auto c = f.credits.data();
  for (std::size_t b = 0; b < batch.size(); ++b) {
    CreditMatrix& m = out[b];
    m.steps = f.layout.length(b);
    m.agents = f.layout.agents();
    const std::size_t first = f.layout.row(b, 0, 0);
    m.values.assign(c.begin() + first, c.begin() + first + m.steps * m.agents);
    m.total = f.returns[b];
  }
  return out;
}

CreditMatrix Decomposer::predict_credits(const envs::Trajectory& trajectory, std::size_t k,
                                         Rng& rng) const {
  const envs::Trajectory* one[] = {&trajectory};
  return std::move(predict_credits(one, k, rng)[0]);
}

Tensor Decomposer::decomposition_loss(Tape& tape, std::span<const envs::Trajectory* const> batch,
                                      std::size_t k, Rng& rng) const {
  if (batch.empty()) throw ContractError("decomposition_loss: empty batch");
  const Forward f = forward(tape, batch, k, rng);
  std::vector<double> target(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) target[b] = batch[b]->episodic_return;
  const Tensor r(Shape{batch.size(), 1}, std::move(target), false);
  return mean(tape, square(tape, sub(tape, f.returns, r)));
}

// ------------------------------------------------------------- checkpoint

namespace {
constexpr const char* kMagic = "STASDCMP";
constexpr std::uint64_t kVersion = 1;
}  // namespace

void Decomposer::save(std::ostream& out) const {
  BinaryWriter w(out);
  w.raw(kMagic, 8);
  w.u64(kVersion);
  w.str(config_.architecture_hash());
  w.str(config_.describe_architecture());
  const auto params = parameters();
  w.u64(params.size());
  for (const Tensor& p : params) w.f64s(p.data());
  if (!out) throw FormatError("decomposer checkpoint: write failed");
}

void Decomposer::load(std::istream& in) {
  BinaryReader r(in);
  r.expect(kMagic);
  if (r.u64() != kVersion) throw FormatError("decomposer checkpoint: unsupported version");
  const std::string hash = r.str();
  const std::string arch = r.str();
  if (hash != config_.architecture_hash()) {
    throw FormatError("decomposer checkpoint: architecture mismatch (file " + arch + ", model " +
                      config_.describe_architecture() + ")");
  }
  auto params = parameters();
  if (r.u64() != params.size()) throw FormatError("decomposer checkpoint: parameter count differs");
  std::vector<std::vector<double>> blobs;
  for (const Tensor& p : params) {
    blobs.push_back(r.f64s());
    if (blobs.back().size() != p.size()) throw FormatError("decomposer checkpoint: shape differs");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto dst = params[k].mutable_data();
    std::copy(blobs[k].begin(), blobs[k].end(), dst.begin());
  }
}

void Decomposer::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  save(out);
}

void Decomposer::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  load(in);
}

void write_credit_csv(std::ostream& out, const std::vector<CreditMatrix>& credits,
                      std::size_t first_episode) {
  out << "episode,t,agent,credit\n";
  char buf[64];
  for (std::size_t e = 0; e < credits.size(); ++e) {
    const CreditMatrix& m = credits[e];
    for (std::size_t t = 0; t < m.steps; ++t)
      for (std::size_t i = 0; i < m.agents; ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", m.at(t, i));
        out << first_episode + e << ',' << t << ',' << i << ',' << buf << '\n';
      }
  }
}

}  // namespace stas::decomposer
