#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stas/core/optim.hpp"
#include "stas/decomposer/model.hpp"
#include "stas/policy/ppo.hpp"
#include "stas/trainer/buffer.hpp"
#include "stas/trainer/config.hpp"

namespace stas::trainer {

struct IterationRecord {
  std::size_t iteration = 0;
  // Policy episodes collected so far (warmup excluded).
  std::size_t episodes = 0;
  double avg_return = 0.0;
  double success_rate = 0.0;
  // Latest decomposer phase loss; NaN before the first phase.
  double decomposer_loss = 0.0;
  std::vector<double> entropy;
  bool decomposer_trained = false;
  std::size_t inner_epochs = 0;
};

struct PhaseResult {
  std::vector<double> epoch_losses;
  double final_loss = 0.0;
};

// In-memory learner state for one run: buffer, decomposer, one policy per
// agent, counters and the run generator.
class Trainer {
 public:
  explicit Trainer(TrainConfig config);

  const TrainConfig& config() const noexcept { return config_; }

  // Random-policy episodes into the buffer, then one decomposer phase
  // (both skipped when warmup_episodes is 0).
  void warmup();
  // One pass of the outer loop: collect, store, credit, update policies,
  // and train the decomposer when iteration % M == 0.
  IterationRecord iterate();
  // Decomposer epochs on one sampled D' until the plateau rule or the cap.
  PhaseResult train_decomposer();

  // Per-step learning signal for each episode, row-major [t][i].
  std::vector<std::vector<double>> credits_for(
      const std::vector<const envs::EpisodeRecord*>& episodes);

  std::size_t iteration() const noexcept { return iteration_; }
  std::size_t episodes() const noexcept { return episodes_; }
  std::size_t decomposer_phases() const noexcept { return phases_; }
  std::size_t policy_updates(std::size_t agent) const { return updates_.at(agent); }
  bool warmed_up() const noexcept { return warmed_up_; }

  const ExperienceBuffer& buffer() const noexcept { return buffer_; }
  const decomposer::Decomposer& model() const noexcept { return *decomposer_; }
  decomposer::Decomposer& model() noexcept { return *decomposer_; }
  policy::ActorCritic& agent_policy(std::size_t i) { return *policies_.at(i); }
  std::size_t agents() const noexcept { return policies_.size(); }
  Rng& rng() noexcept { return rng_; }

  // Full state including the config snapshot; load restores bit for bit.
  void save(std::ostream& out) const;
  static std::unique_ptr<Trainer> load(std::istream& in);
  void save(const std::string& path) const;
  static std::unique_ptr<Trainer> load(const std::string& path);

 private:
  envs::EpisodeRecord collect(std::uint64_t episode_seed, bool random_policy);
  void record_outcome(const envs::Trajectory& t);

  TrainConfig config_;
  std::unique_ptr<decomposer::Decomposer> decomposer_;
  OptimizerState decomposer_opt_;
  std::vector<std::unique_ptr<policy::ActorCritic>> policies_;
  ExperienceBuffer buffer_;
  Rng rng_;
  std::size_t iteration_ = 0;
  std::size_t episodes_ = 0;
  std::uint64_t episode_counter_ = 0;  // seeds, warmup included
  std::size_t phases_ = 0;
  std::vector<std::size_t> updates_;
  bool warmed_up_ = false;
  double last_loss_;
  std::deque<double> window_returns_;
  std::deque<unsigned char> window_success_;
};

// Run directory: config.yaml, seed.txt, metrics.csv, checkpoint.bin and,
// after a failure, error.txt.
struct RunOptions {
  // Stop (after checkpointing) once this many iterations are done.
  std::optional<std::size_t> stop_after;
  std::function<void(const IterationRecord&)> on_iteration;
};

// Starts a fresh run in run_dir (created; existing metrics are replaced).
void train(const TrainConfig& config, const std::string& run_dir, const RunOptions& options = {});
// Continues the run in run_dir from its checkpoint up to the configured
// iteration count. Metric rows after the checkpoint are discarded first.
void resume(const std::string& run_dir, const RunOptions& options = {});

std::string metrics_header(std::size_t agents);
std::string metrics_row(const IterationRecord& r);

}  // namespace stas::trainer
