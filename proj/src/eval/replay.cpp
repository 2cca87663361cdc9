#include "stas/eval/replay.hpp"

#include <ostream>

#include "stas/core/errors.hpp"
#include "stas/core/random.hpp"
#include "stas/trainer/config_io.hpp"

namespace stas::eval {

void replay_credits(const trainer::Trainer& trainer, const std::vector<envs::Trajectory>& trajectories,
                    const ReplayOptions& options, std::ostream& out) {
  const auto& config = trainer.config();
  const std::string scenario = envs::to_string(config.env.scenario);
  std::vector<const envs::Trajectory*> batch;
  for (const auto& tr : trajectories) {
    if (tr.scenario != scenario) {
      throw ValidationError("replay: trajectory scenario " + tr.scenario + " does not match checkpoint " + scenario);
    }
    if (tr.agents != config.env.agents || tr.state_dim != config.decomposer.state_dim ||
        tr.action_count != config.decomposer.action_count) {
      throw ValidationError("replay: trajectory shape does not match the checkpoint");
    }
    batch.push_back(&tr);
  }
  Rng rng(options.seed);
  const std::size_t k = options.k_samples ? options.k_samples : config.decomposer.k_samples;
  std::vector<decomposer::CreditMatrix> credits;
  if (!batch.empty()) credits = trainer.model().predict_credits(batch, k, rng);
  out << "# config_hash=" << trainer::config_hash(config) << '\n';
  decomposer::write_credit_csv(out, credits);
}

std::vector<envs::Trajectory> buffered_trajectories(const trainer::Trainer& trainer, std::size_t n) {
  std::vector<envs::Trajectory> out;
  for (const auto* e : trainer.buffer().latest(n)) out.push_back(e->trajectory);
  return out;
}

}  // namespace stas::eval
