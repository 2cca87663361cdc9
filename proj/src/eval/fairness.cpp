#include "stas/eval/fairness.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <ostream>

#include "stas/core/errors.hpp"
#include "stas/core/random.hpp"
#include "stas/envs/environment.hpp"
#include "stas/envs/episode.hpp"
#include "stas/trainer/config_io.hpp"

namespace stas::eval {

double nearest_prey_distance(const envs::Trajectory& tr, std::size_t t, std::size_t agent,
                             std::size_t preys) {
  const auto s = tr.state(t, agent);
  if (s.size() < 4 + 2 * preys) throw DimensionError("fairness: state too short for prey offsets");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < preys; ++m) {
    best = std::min(best, envs::distance({0.0, 0.0}, {s[4 + 2 * m], s[5 + 2 * m]}));
  }
  return best;
}

FairnessReport evaluate_fairness(trainer::Trainer& trainer, const FairnessOptions& options) {
  const trainer::TrainConfig& config = trainer.config();
  if (config.env.scenario != envs::Scenario::PredatorPrey) {
    throw ValidationError(std::string("eval-fairness: checkpoint scenario is ") +
                          envs::to_string(config.env.scenario) + ", expected predator_prey");
  }
  const std::size_t k = options.k_samples ? options.k_samples : config.decomposer.k_samples;
  const std::size_t preys = config.env.particle.preys;

  std::vector<envs::AgentPolicy*> acting;
  for (std::size_t i = 0; i < trainer.agents(); ++i) acting.push_back(&trainer.agent_policy(i));
  Rng credit_rng(derive_seed(options.seed, 1));

  FairnessReport report;
  report.episodes = options.episodes;
  report.config_hash = trainer::config_hash(config);
  std::vector<double> credits, inverse;
  for (std::size_t e = 0; e < options.episodes; ++e) {
    const auto rec = envs::run_episode(config.env, acting, derive_seed(options.seed, 100 + e));
    const auto& tr = rec.trajectory;
    const auto m = trainer.model().predict_credits(tr, k, credit_rng);
    for (std::size_t t = 0; t < tr.length(); ++t) {
      for (std::size_t i = 0; i < tr.agents; ++i) {
        const double d = std::max(nearest_prey_distance(tr, t, i, preys), options.distance_floor);
        report.records.push_back({e, t, i, m.at(t, i), 1.0 / d});
        credits.push_back(m.at(t, i));
        inverse.push_back(1.0 / d);
      }
    }
  }
  report.correlation = pearson(credits, inverse);
  return report;
}

FairnessReport evaluate_fairness(const std::string& checkpoint, const FairnessOptions& options) {
  auto trainer = trainer::Trainer::load(checkpoint);
  return evaluate_fairness(*trainer, options);
}

void write_fairness_csv(std::ostream& out, const FairnessReport& report) {
  out << "# config_hash=" << report.config_hash << '\n';
  out << "episode,t,agent,credit,inverse_distance\n";
  char buf[96];
  for (const auto& r : report.records) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", r.credit, r.inverse_distance);
    out << r.episode << ',' << r.t << ',' << r.agent << ',' << buf << '\n';
  }
}

}  // namespace stas::eval
