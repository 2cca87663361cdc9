#include "stas/trainer/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "stas/core/errors.hpp"
#include "stas/core/ops.hpp"
#include "stas/core/serialize.hpp"
#include "stas/envs/episode.hpp"
#include "stas/trainer/config_io.hpp"

namespace stas::trainer {

namespace fs = std::filesystem;

namespace {
constexpr std::uint64_t kDecomposerStream = 101;
constexpr std::uint64_t kPolicyStream = 200;
constexpr std::uint64_t kEpisodeStream = 2;
constexpr std::uint64_t kRunStream = 3;
}  // namespace

Trainer::Trainer(TrainConfig config)
    : config_(std::move(config)), buffer_(config_.buffer_capacity),
      rng_(derive_seed(config_.seed, kRunStream)),
      last_loss_(std::numeric_limits<double>::quiet_NaN()) {
  config_.resolve();
  config_.validate();
  decomposer_ = std::make_unique<decomposer::Decomposer>(
      config_.decomposer, derive_seed(config_.seed, kDecomposerStream));
  decomposer_opt_ =
      OptimizerState::for_params(decomposer_->parameters(), config_.decomposer_optimizer);
  for (std::size_t i = 0; i < config_.env.agents; ++i) {
    policies_.push_back(std::make_unique<policy::ActorCritic>(
        config_.policy, derive_seed(config_.seed, kPolicyStream + i)));
  }
  updates_.assign(config_.env.agents, 0);
}

envs::EpisodeRecord Trainer::collect(std::uint64_t episode_seed, bool random_policy) {
  std::vector<envs::UniformRandomPolicy> random(policies_.size(),
                                                envs::UniformRandomPolicy(config_.policy.action_count));
  std::vector<envs::AgentPolicy*> acting;
  for (std::size_t i = 0; i < policies_.size(); ++i) {
    acting.push_back(random_policy ? static_cast<envs::AgentPolicy*>(&random[i]) : policies_[i].get());
  }
  return envs::run_episode(config_.env, acting, episode_seed);
}

void Trainer::record_outcome(const envs::Trajectory& t) {
  window_returns_.push_back(t.episodic_return);
  window_success_.push_back(t.success ? 1 : 0);
  while (window_returns_.size() > config_.moving_average) {
    window_returns_.pop_front();
    window_success_.pop_front();
  }
}

void Trainer::warmup() {
  if (warmed_up_) return;
  warmed_up_ = true;
  if (config_.warmup_episodes == 0) return;
  const std::uint64_t base = derive_seed(config_.seed, kEpisodeStream);
  for (std::size_t e = 0; e < config_.warmup_episodes; ++e) {
    buffer_.push(collect(derive_seed(base, episode_counter_++), true));
  }
  if (config_.credit_mode == CreditMode::Stas) last_loss_ = train_decomposer().final_loss;
}

std::vector<std::vector<double>> Trainer::credits_for(
    const std::vector<const envs::EpisodeRecord*>& episodes) {
  std::vector<std::vector<double>> out;
  if (config_.credit_mode == CreditMode::Uniform) {
    for (const auto* e : episodes) {
      const auto& tr = e->trajectory;
      const double each = tr.episodic_return / static_cast<double>(tr.agents * tr.length());
      out.emplace_back(tr.agents * tr.length(), each);
    }
    return out;
  }
  std::vector<const envs::Trajectory*> batch;
  for (const auto* e : episodes) batch.push_back(&e->trajectory);
  for (auto& m : decomposer_->predict_credits(batch, config_.decomposer.k_samples, rng_)) {
    out.push_back(std::move(m.values));
  }
  return out;
}

PhaseResult Trainer::train_decomposer() {
  PhaseResult result;
  if (buffer_.empty()) throw ContractError("decomposer phase: experience buffer is empty");
  const auto picked = buffer_.sample(config_.decomposer_batch, rng_);
  std::vector<const envs::Trajectory*> batch;
  std::vector<std::size_t> lengths;
  std::vector<double> target;
  for (const auto* e : picked) {
    batch.push_back(&e->trajectory);
    lengths.push_back(e->trajectory.length());
    target.push_back(e->trajectory.episodic_return);
  }
  const decomposer::BatchLayout layout(config_.env.agents, lengths);
  // One coalition draw per phase, so epoch losses are comparable.
  const auto masks = decomposer_->sample_masks(layout, config_.decomposer.k_samples, rng_);
  const Tensor r(Shape{batch.size(), 1}, std::move(target));
  auto params = decomposer_->parameters();

  std::size_t stall = 0;
  for (std::size_t epoch = 0; epoch < config_.max_inner_epochs; ++epoch) {
    Tape tape;
    const auto f = decomposer_->forward(tape, batch, masks);
    const Tensor loss = mean(tape, square(tape, sub(tape, f.returns, r)));
    const double value = loss.item();
    if (!result.epoch_losses.empty()) {
      const double prev = result.epoch_losses.back();
      const double rel = (prev - value) / std::max(std::abs(prev), 1e-12);
      stall = rel < config_.plateau_tolerance ? stall + 1 : 0;
    }
    result.epoch_losses.push_back(value);
    if (stall >= config_.plateau_patience) break;
    optimizer_step(params, backward(loss, tape), decomposer_opt_);
  }
  result.final_loss = result.epoch_losses.back();
  ++phases_;
  return result;
}

IterationRecord Trainer::iterate() {
  warmup();
  const std::uint64_t base = derive_seed(config_.seed, kEpisodeStream);
  for (std::size_t e = 0; e < config_.episodes_per_iteration; ++e) {
    const auto ep = collect(derive_seed(base, episode_counter_++), false);
    record_outcome(ep.trajectory);
    buffer_.push(ep);
    ++episodes_;
  }

  const auto batch = buffer_.latest(config_.policy_batch);
  const auto credits = credits_for(batch);
  const std::size_t n = policies_.size();
  const std::size_t S = config_.policy.state_dim;

  IterationRecord rec;
  rec.iteration = iteration_;
  rec.entropy.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<policy::AgentRollout> rollouts;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto& tr = batch[b]->trajectory;
      policy::AgentRollout r;
      r.state_dim = S;
      for (std::size_t t = 0; t < tr.length(); ++t) {
        const auto s = tr.state(t, i);
        r.states.insert(r.states.end(), s.begin(), s.end());
        r.actions.push_back(tr.action(t, i));
        r.log_probs.push_back(batch[b]->log_probs[t * n + i]);
        r.credits.push_back(credits[b][t * n + i]);
      }
      rollouts.push_back(std::move(r));
    }
    const auto stats = policies_[i]->update(rollouts, rng_);
    if (stats.refused) {
      throw NumericError("policy update for agent " + std::to_string(i) + " refused: " + stats.refusal);
    }
    rec.entropy[i] = stats.entropy;
    ++updates_[i];
  }

  if (config_.credit_mode == CreditMode::Stas && iteration_ % config_.decomposer_every == 0) {
    const auto phase = train_decomposer();
    last_loss_ = phase.final_loss;
    rec.decomposer_trained = true;
    rec.inner_epochs = phase.epoch_losses.size();
  }

  ++iteration_;
  rec.episodes = episodes_;
  double sr = 0.0, ss = 0.0;
  for (double v : window_returns_) sr += v;
  for (unsigned char v : window_success_) ss += v;
  rec.avg_return = sr / static_cast<double>(window_returns_.size());
  rec.success_rate = ss / static_cast<double>(window_success_.size());
  rec.decomposer_loss = last_loss_;
  return rec;
}

// ------------------------------------------------------------- checkpoint

namespace {
constexpr const char* kMagic = "STASTRNR";
constexpr std::uint64_t kVersion = 1;
}  // namespace

void Trainer::save(std::ostream& out) const {
  BinaryWriter w(out);
  w.raw(kMagic, 8);
  w.u64(kVersion);
  w.str(to_yaml(config_));
  w.u64(iteration_);
  w.u64(episodes_);
  w.u64(episode_counter_);
  w.u64(phases_);
  w.u64(updates_.size());
  for (std::size_t u : updates_) w.u64(u);
  w.u64(warmed_up_ ? 1 : 0);
  w.f64(last_loss_);
  w.f64s(std::vector<double>(window_returns_.begin(), window_returns_.end()));
  w.f64s(std::vector<double>(window_success_.begin(), window_success_.end()));
  w.str(rng_.state());
  buffer_.save(w);
  std::ostringstream model;
  decomposer_->save(model);
  w.str(model.str());
  decomposer_opt_.save(w);
  for (const auto& p : policies_) {
    std::ostringstream blob;
    p->save(blob);
    w.str(blob.str());
  }
  if (!out) throw FormatError("trainer checkpoint: write failed");
}

std::unique_ptr<Trainer> Trainer::load(std::istream& in) {
  BinaryReader r(in);
  r.expect(kMagic);
  if (r.u64() != kVersion) throw FormatError("trainer checkpoint: unsupported version");
  auto t = std::make_unique<Trainer>(parse_train_config(r.str()));
  t->iteration_ = r.u64();
  t->episodes_ = r.u64();
  t->episode_counter_ = r.u64();
  t->phases_ = r.u64();
  if (r.u64() != t->updates_.size()) throw FormatError("trainer checkpoint: agent count differs");
  for (auto& u : t->updates_) u = r.u64();
  t->warmed_up_ = r.u64() != 0;
  t->last_loss_ = r.f64();
  const auto returns = r.f64s();
  const auto success = r.f64s();
  t->window_returns_.assign(returns.begin(), returns.end());
  for (double s : success) t->window_success_.push_back(s != 0.0 ? 1 : 0);
  t->rng_.set_state(r.str());
  t->buffer_.load(r);
  std::istringstream model(r.str());
  t->decomposer_->load(model);
  t->decomposer_opt_.load(r);
  for (auto& p : t->policies_) {
    std::istringstream blob(r.str());
    p->load(blob);
  }
  return t;
}

void Trainer::save(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw FormatError("cannot write " + tmp);
    save(out);
  }
  fs::rename(tmp, path);
}

std::unique_ptr<Trainer> Trainer::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return load(in);
}

// ------------------------------------------------------------------ runs

std::string metrics_header(std::size_t agents) {
  std::string h = "iteration,episodes,avg_return,success_rate,decomposer_loss";
  for (std::size_t i = 0; i < agents; ++i) h += ",entropy_" + std::to_string(i);
  return h;
}

std::string metrics_row(const IterationRecord& r) {
  auto num = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  std::string row = std::to_string(r.iteration) + "," + std::to_string(r.episodes) + "," +
                    num(r.avg_return) + "," + num(r.success_rate) + "," + num(r.decomposer_loss);
  for (double e : r.entropy) row += "," + num(e);
  return row;
}

namespace {

void run_loop(Trainer& t, const fs::path& dir, const RunOptions& options) {
  const std::string checkpoint = (dir / "checkpoint.bin").string();
  std::ofstream metrics(dir / "metrics.csv", std::ios::app);
  if (!metrics) throw FormatError("cannot append to " + (dir / "metrics.csv").string());
  try {
    t.warmup();
    while (t.iteration() < t.config().iterations) {
      const IterationRecord rec = t.iterate();
      metrics << metrics_row(rec) << '\n';
      metrics.flush();
      if (options.on_iteration) options.on_iteration(rec);
      const bool stop = options.stop_after && t.iteration() >= *options.stop_after;
      if (stop || (t.config().checkpoint_every && t.iteration() % t.config().checkpoint_every == 0)) {
        t.save(checkpoint);
      }
      if (stop) return;
    }
    t.save(checkpoint);
  } catch (const std::exception& e) {
    std::ofstream err(dir / "error.txt");
    err << "iteration " << t.iteration() << ": " << e.what() << '\n';
    throw;
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

}  // namespace

void train(const TrainConfig& config, const std::string& run_dir, const RunOptions& options) {
  const fs::path dir(run_dir);
  fs::create_directories(dir);
  fs::remove(dir / "error.txt");
  fs::remove(dir / "checkpoint.bin");
  Trainer t(config);
  write_text(dir / "config.yaml", to_yaml(t.config()));
  write_text(dir / "seed.txt", std::to_string(t.config().seed) + "\n");
  write_text(dir / "metrics.csv",
             "# config_hash=" + config_hash(t.config()) + "\n" + metrics_header(t.agents()) + "\n");
  run_loop(t, dir, options);
}

void resume(const std::string& run_dir, const RunOptions& options) {
  const fs::path dir(run_dir);
  auto t = Trainer::load((dir / "checkpoint.bin").string());
  // Drop metric rows written after the checkpoint.
  std::ifstream in(dir / "metrics.csv");
  if (!in) throw FormatError("cannot read " + (dir / "metrics.csv").string());
  std::string kept, line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no <= 2 || line.empty()) {
      if (!line.empty()) kept += line + "\n";
      continue;
    }
    if (std::stoull(line.substr(0, line.find(','))) < t->iteration()) kept += line + "\n";
  }
  in.close();
  write_text(dir / "metrics.csv", kept);
  fs::remove(dir / "error.txt");
  run_loop(*t, dir, options);
}

}  // namespace stas::trainer
