#include "stas/policy/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "stas/core/errors.hpp"
#include "stas/core/init.hpp"
#include "stas/core/ops.hpp"
#include "stas/core/serialize.hpp"

namespace stas::policy {

void PolicyConfig::validate() const {
  if (state_dim == 0) throw ConfigError("policy.state_dim", "must be positive");
  if (action_count == 0) throw ConfigError("policy.action_count", "must be positive");
  if (hidden == 0) throw ConfigError("policy.hidden", "must be positive");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("policy.gamma", "must lie in [0, 1]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("policy.lambda", "must lie in [0, 1]");
  if (!(clip > 0.0 && clip < 1.0)) throw ConfigError("policy.clip", "must lie in (0, 1)");
  if (epochs == 0) throw ConfigError("policy.epochs", "must be positive");
  if (!(entropy_coef >= 0.0)) throw ConfigError("policy.entropy_coef", "must be non-negative");
  if (!(value_coef >= 0.0)) throw ConfigError("policy.value_coef", "must be non-negative");
  if (!(actor_optimizer.learning_rate > 0.0)) throw ConfigError("policy.actor_lr", "must be positive");
  if (!(critic_optimizer.learning_rate > 0.0)) {
    throw ConfigError("policy.critic_lr", "must be positive");
  }
}

std::string PolicyConfig::describe_architecture() const {
  std::ostringstream s;
  s << "state_dim=" << state_dim << ";action_count=" << action_count << ";hidden=" << hidden;
  return s.str();
}

Advantages compute_advantages(std::span<const double> credits, std::span<const double> values,
                              double gamma, double lambda) {
  if (credits.size() != values.size()) {
    throw DimensionError("compute_advantages: credits and values differ in length");
  }
  const std::size_t T = credits.size();
  Advantages out;
  out.advantages.assign(T, 0.0);
  out.returns.assign(T, 0.0);
  double running = 0.0;
  for (std::size_t t = T; t-- > 0;) {
    const double next = t + 1 < T ? values[t + 1] : 0.0;
    const double delta = credits[t] + gamma * next - values[t];
    running = delta + gamma * lambda * running;
    out.advantages[t] = running;
    out.returns[t] = running + values[t];
  }
  return out;
}

void standardize(std::vector<double>& values) {
  if (values.empty()) return;
  const double n = static_cast<double>(values.size());
  const double mu = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - mu) * (v - mu);
  const double sd = std::sqrt(var / n);
  for (double& v : values) v = sd > 1e-12 ? (v - mu) / sd : v - mu;
}

// ---------------------------------------------------------------- network

namespace {

// Plain forward of a tanh MLP for one state, no tape.
void dense(const Linear& layer, std::span<const double> in, std::vector<double>& out, bool squash) {
  const std::size_t n_in = layer.in(), n_out = layer.out();
  auto w = layer.weight.data();
  auto b = layer.bias.data();
  out.assign(b.begin(), b.end());
  for (std::size_t i = 0; i < n_in; ++i) {
    const double x = in[i];
    const double* row = w.data() + i * n_out;
    for (std::size_t j = 0; j < n_out; ++j) out[j] += x * row[j];
  }
  if (squash) {
    for (double& v : out) v = std::tanh(v);
  }
}

std::vector<double> softmax_of(const std::vector<double>& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t a = 0; a < logits.size(); ++a) {
    p[a] = std::exp(logits[a] - m);
    z += p[a];
  }
  for (double& v : p) v /= z;
  return p;
}

}  // namespace

ActorCritic::ActorCritic(PolicyConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  const std::size_t s = config_.state_dim, h = config_.hidden, a = config_.action_count;
  a1_ = Linear(s, h, rng);
  a2_ = Linear(h, h, rng);
  a3_ = Linear(h, a, rng);
  c1_ = Linear(s, h, rng);
  c2_ = Linear(h, h, rng);
  c3_ = Linear(h, 1, rng);
  // Small last actor layer so the initial policy is close to uniform.
  for (double& w : a3_.weight.mutable_data()) w *= 0.01;
  actor_opt_ = OptimizerState::for_params(actor_parameters(), config_.actor_optimizer);
  critic_opt_ = OptimizerState::for_params(critic_parameters(), config_.critic_optimizer);
}

std::vector<Tensor> ActorCritic::actor_parameters() const {
  std::vector<Tensor> p;
  a1_.collect(p);
  a2_.collect(p);
  a3_.collect(p);
  return p;
}

std::vector<Tensor> ActorCritic::critic_parameters() const {
  std::vector<Tensor> p;
  c1_.collect(p);
  c2_.collect(p);
  c3_.collect(p);
  return p;
}

std::vector<double> ActorCritic::probabilities(std::span<const double> state) const {
  if (state.size() != config_.state_dim) {
    throw DimensionError("policy: state has " + std::to_string(state.size()) + " entries, expected " +
                         std::to_string(config_.state_dim));
  }
  std::vector<double> h1, h2, out;
  dense(a1_, state, h1, true);
  dense(a2_, h1, h2, true);
  dense(a3_, h2, out, false);
  return softmax_of(out);
}

double ActorCritic::value(std::span<const double> state) const {
  if (state.size() != config_.state_dim) throw DimensionError("policy: state size mismatch");
  std::vector<double> h1, h2, out;
  dense(c1_, state, h1, true);
  dense(c2_, h1, h2, true);
  dense(c3_, h2, out, false);
  return out[0];
}

envs::ActionChoice ActorCritic::act(std::span<const double> state, Rng& rng) {
  const auto p = probabilities(state);
  const std::size_t a = rng.categorical(p);
  return {static_cast<int>(a), std::log(p[a])};
}

int ActorCritic::act_greedy(std::span<const double> state) const {
  const auto p = probabilities(state);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

Tensor ActorCritic::logits(Tape& tape, const Tensor& states) const {
  Tensor h = tanh(tape, a1_(tape, states));
  h = tanh(tape, a2_(tape, h));
  return a3_(tape, h);
}

Tensor ActorCritic::values(Tape& tape, const Tensor& states) const {
  Tensor h = tanh(tape, c1_(tape, states));
  h = tanh(tape, c2_(tape, h));
  return c3_(tape, h);
}

SurrogateTerms surrogate_loss(Tape& tape, const Tensor& logits, std::span<const std::size_t> actions,
                              std::span<const double> old_log_probs,
                              std::span<const double> advantages, double clip, double entropy_coef) {
  const std::size_t n = logits.rows();
  if (actions.size() != n || old_log_probs.size() != n || advantages.size() != n) {
    throw DimensionError("surrogate_loss: batch columns differ in length");
  }
  const Tensor logp_all = log_softmax(tape, logits);
  const Tensor logp = pick(tape, logp_all, actions);
  const Tensor old = Tensor(Shape{n}, {old_log_probs.begin(), old_log_probs.end()});
  const Tensor adv = Tensor(Shape{n}, {advantages.begin(), advantages.end()});
  SurrogateTerms out;
  out.ratio = exp(tape, sub(tape, logp, old));
  const Tensor unclipped = mul(tape, out.ratio, adv);
  const Tensor clipped = mul(tape, clamp(tape, out.ratio, 1.0 - clip, 1.0 + clip), adv);
  const Tensor surrogate = mean(tape, minimum(tape, unclipped, clipped));
  const Tensor p = softmax(tape, logits);
  out.entropy = scale(tape, row_sum(tape, mul(tape, p, logp_all)), -1.0);
  out.loss = sub(tape, scale(tape, surrogate, -1.0), scale(tape, mean(tape, out.entropy), entropy_coef));
  return out;
}

UpdateStats ActorCritic::update(std::span<const AgentRollout> batch, Rng& rng) {
  std::size_t rows = 0;
  for (const AgentRollout& r : batch) {
    if (r.state_dim != config_.state_dim || r.states.size() != r.length() * r.state_dim ||
        r.log_probs.size() != r.length() || r.credits.size() != r.length()) {
      throw DimensionError("policy update: malformed rollout");
    }
    rows += r.length();
  }
  if (rows == 0) throw ContractError("policy update: empty batch");

  const std::size_t S = config_.state_dim;
  std::vector<double> states;
  std::vector<std::size_t> actions;
  std::vector<double> old_logp, advantages, returns;
  states.reserve(rows * S);
  for (const AgentRollout& r : batch) {
    std::vector<double> v(r.length());
    for (std::size_t t = 0; t < r.length(); ++t) {
      v[t] = value(std::span<const double>(r.states).subspan(t * S, S));
    }
    Advantages g = compute_advantages(r.credits, v, config_.gamma, config_.lambda);
    states.insert(states.end(), r.states.begin(), r.states.end());
    for (int a : r.actions) {
      if (a < 0 || static_cast<std::size_t>(a) >= config_.action_count) {
        throw ValidationError("policy update: action index out of range");
      }
      actions.push_back(static_cast<std::size_t>(a));
    }
    old_logp.insert(old_logp.end(), r.log_probs.begin(), r.log_probs.end());
    advantages.insert(advantages.end(), g.advantages.begin(), g.advantages.end());
    returns.insert(returns.end(), g.returns.begin(), g.returns.end());
  }
  standardize(advantages);

  const std::size_t mb = config_.minibatch_size == 0 ? rows : std::min(rows, config_.minibatch_size);
  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), 0);

  UpdateStats stats;
  double ratio_sum = 0.0, clipped = 0.0, entropy_sum = 0.0, ploss = 0.0, vloss = 0.0;
  std::size_t seen = 0, passes = 0;
  auto actor = actor_parameters();
  auto critic = critic_parameters();

  for (std::size_t epoch = 0; epoch < config_.epochs && !stats.refused; ++epoch) {
    for (std::size_t a = rows - 1; a > 0 && mb < rows; --a) {
      std::swap(order[a], order[rng.uniform_int(a + 1)]);
    }
    for (std::size_t start = 0; start < rows; start += mb) {
      const std::size_t n = std::min(mb, rows - start);
      std::vector<double> xs(n * S), lp(n), adv(n), ret(n);
      std::vector<std::size_t> act(n);
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t r = order[start + k];
        std::copy_n(states.begin() + static_cast<std::ptrdiff_t>(r * S), S,
                    xs.begin() + static_cast<std::ptrdiff_t>(k * S));
        act[k] = actions[r];
        lp[k] = old_logp[r];
        adv[k] = advantages[r];
        ret[k] = returns[r];
      }
      try {
        Tape tape;
        const Tensor x(Shape{n, S}, std::move(xs));
        SurrogateTerms s = surrogate_loss(tape, logits(tape, x), act, lp, adv, config_.clip,
                                          config_.entropy_coef);
        const Tensor target(Shape{n, 1}, std::move(ret));
        const Tensor vl = mean(tape, square(tape, sub(tape, values(tape, x), target)));
        const Tensor total = add(tape, s.loss, scale(tape, vl, config_.value_coef));
        if (!std::isfinite(total.item())) throw NumericError("policy update: non-finite loss");
        const Gradients g = backward(total, tape);
        if (!std::isfinite(g.squared_norm(actor)) || !std::isfinite(g.squared_norm(critic))) {
          throw PoisonedUpdateError("policy update: non-finite gradient");
        }
        optimizer_step(actor, g, actor_opt_);
        optimizer_step(critic, g, critic_opt_);
        for (std::size_t k = 0; k < n; ++k) {
          const double r = s.ratio[k];
          ratio_sum += r;
          if (std::abs(r - 1.0) > config_.clip) clipped += 1.0;
          entropy_sum += s.entropy[k];
        }
        ploss += s.loss.item();
        vloss += vl.item();
        seen += n;
        ++passes;
      } catch (const NumericError& e) {
        stats.refused = true;
        stats.refusal = e.what();
        break;
      } catch (const PoisonedUpdateError& e) {
        stats.refused = true;
        stats.refusal = e.what();
        break;
      }
    }
  }
  if (seen > 0) {
    stats.mean_ratio = ratio_sum / static_cast<double>(seen);
    stats.clip_fraction = clipped / static_cast<double>(seen);
    stats.entropy = entropy_sum / static_cast<double>(seen);
    stats.policy_loss = ploss / static_cast<double>(passes);
    stats.value_loss = vloss / static_cast<double>(passes);
  }
  stats.samples = seen;
  return stats;
}

// ------------------------------------------------------------- checkpoint

namespace {
constexpr const char* kMagic = "STASPOLI";
constexpr std::uint64_t kVersion = 1;

void write_params(BinaryWriter& w, const std::vector<Tensor>& params) {
  w.u64(params.size());
  for (const Tensor& p : params) w.f64s(p.data());
}

std::vector<std::vector<double>> read_params(BinaryReader& r, const std::vector<Tensor>& params) {
  if (r.u64() != params.size()) throw FormatError("policy checkpoint: parameter count differs");
  std::vector<std::vector<double>> blobs;
  for (const Tensor& p : params) {
    blobs.push_back(r.f64s());
    if (blobs.back().size() != p.size()) throw FormatError("policy checkpoint: shape differs");
  }
  return blobs;
}
}  // namespace

void ActorCritic::save(std::ostream& out) const {
  BinaryWriter w(out);
  w.raw(kMagic, 8);
  w.u64(kVersion);
  w.str(hex64(fnv1a64(config_.describe_architecture())));
  w.str(config_.describe_architecture());
  write_params(w, actor_parameters());
  write_params(w, critic_parameters());
  actor_opt_.save(w);
  critic_opt_.save(w);
  if (!out) throw FormatError("policy checkpoint: write failed");
}

void ActorCritic::load(std::istream& in) {
  BinaryReader r(in);
  r.expect(kMagic);
  if (r.u64() != kVersion) throw FormatError("policy checkpoint: unsupported version");
  const std::string hash = r.str();
  const std::string arch = r.str();
  if (hash != hex64(fnv1a64(config_.describe_architecture()))) {
    throw FormatError("policy checkpoint: architecture mismatch (file " + arch + ", model " +
                      config_.describe_architecture() + ")");
  }
  auto actor = actor_parameters();
  auto critic = critic_parameters();
  auto actor_blobs = read_params(r, actor);
  auto critic_blobs = read_params(r, critic);
  OptimizerState aopt = actor_opt_, copt = critic_opt_;
  aopt.load(r);
  copt.load(r);
  for (std::size_t k = 0; k < actor.size(); ++k) {
    std::copy(actor_blobs[k].begin(), actor_blobs[k].end(), actor[k].mutable_data().begin());
  }
  for (std::size_t k = 0; k < critic.size(); ++k) {
    std::copy(critic_blobs[k].begin(), critic_blobs[k].end(), critic[k].mutable_data().begin());
  }
  actor_opt_ = std::move(aopt);
  critic_opt_ = std::move(copt);
}

}  // namespace stas::policy
