#include <gtest/gtest.h>

#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "stas/core/errors.hpp"
#include "stas/core/random.hpp"
#include "stas/envs/environment.hpp"
#include "stas/eval/fairness.hpp"
#include "stas/eval/plot_data.hpp"
#include "stas/eval/replay.hpp"
#include "stas/eval/stats.hpp"
#include "stas/eval/synthetic.hpp"
#include "stas/trainer/config_io.hpp"

using namespace stas;
using namespace stas::eval;
namespace fs = std::filesystem;

namespace {

// Textbook two-pass Pearson.
double two_pass_r(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= x.size();
  my /= y.size();
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
    syy += (y[k] - my) * (y[k] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Two-tailed p through the incomplete beta function.
double beta_p(double r, std::size_t n) {
  const double df = static_cast<double>(n - 2);
  const double t2 = r * r * df / (1.0 - r * r);
  return boost::math::ibeta(df / 2.0, 0.5, df / (df + t2));
}

const char* kTinyPredator = R"(
env:
  scenario: predator_prey
  horizon: 10
decomposer:
  d_model: 8
  heads: 2
  ff_width: 16
  k_samples: 2
policy:
  hidden: 8
  epochs: 1
trainer:
  seed: 3
  iterations: 2
  episodes_per_iteration: 2
  decomposer_every: 1
  max_inner_epochs: 2
  policy_batch: 2
  decomposer_batch: 4
  buffer_capacity: 16
  warmup_episodes: 4
)";

const char* kTinyAlice = R"(
env:
  scenario: alice_bob
  horizon: 10
decomposer:
  d_model: 8
  heads: 2
  ff_width: 16
  k_samples: 2
policy:
  hidden: 8
trainer:
  iterations: 2
  episodes_per_iteration: 2
  policy_batch: 2
  decomposer_batch: 4
  buffer_capacity: 16
  warmup_episodes: 4
)";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("stas_eval_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST(Pearson, PerfectLinearPairs) {
  std::vector<double> x, y, z;
  for (int k = 0; k < 50; ++k) {
    x.push_back(0.1 * k * k - k);
    y.push_back(3.0 * x.back() + 2.0);
    z.push_back(-0.5 * x.back() + 7.0);
  }
  EXPECT_NEAR(pearson(x, y).r, 1.0, 1e-12);
  EXPECT_NEAR(pearson(x, z).r, -1.0, 1e-12);
  EXPECT_EQ(pearson(x, y).p_value, 0.0);
}

TEST(Pearson, IndependentNormalsAreSmall) {
  int small = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    std::vector<double> x(10000), y(10000);
    for (auto& v : x) v = rng.normal();
    for (auto& v : y) v = rng.normal();
    if (std::abs(pearson(x, y).r) < 0.05) ++small;
  }
  EXPECT_GE(small, 99);
}

TEST(Pearson, MatchesTwoPassAndBetaOracle) {
  Rng rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 5 + rng.uniform_int(200);
    std::vector<double> x(n), y(n);
    for (std::size_t k = 0; k < n; ++k) {
      x[k] = 100.0 + rng.normal();
      y[k] = 0.3 * x[k] + rng.normal();
    }
    const auto c = pearson(x, y);
    EXPECT_NEAR(c.r, two_pass_r(x, y), 1e-12);
    EXPECT_NEAR(c.p_value, beta_p(c.r, n), 1e-10);
    EXPECT_GE(c.p_value, 0.0);
    EXPECT_LE(c.p_value, 1.0);
    EXPECT_EQ(c.n, n);
  }
}

TEST(Pearson, ConstantSeriesIsDegenerate) {
  const std::vector<double> x{1, 2, 3, 4}, c{5, 5, 5, 5};
  const auto r = pearson(c, x);
  EXPECT_TRUE(r.degenerate);
  EXPECT_FALSE(pearson(x, x).degenerate);
  EXPECT_THROW(pearson(x, std::vector<double>{1, 2}), DimensionError);
}

TEST(MeanStd, PopulationDeviation) {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  const auto m = mean_std(v);
  EXPECT_DOUBLE_EQ(m.mean, 5.0);
  EXPECT_DOUBLE_EQ(m.std, 2.0);
}

TEST(Fairness, DistanceMatchesEnvironmentMetric) {
  auto cfg = envs::EnvConfig::predator_prey(3);
  cfg.particle.preys = 2;
  envs::PredatorPreyEnv env(cfg);
  env.reset(9);
  Rng rng(2);
  for (int step = 0; step < 20 && !env.done(); ++step) {
    envs::Trajectory tr;
    tr.agents = env.agents();
    tr.state_dim = env.state_dim();
    tr.states = env.state().values;
    tr.actions.assign(tr.agents, 0);
    for (std::size_t i = 0; i < tr.agents; ++i) {
      double best = 1e300;
      for (const auto& q : env.prey()) best = std::min(best, envs::distance(env.position(i), q));
      EXPECT_NEAR(nearest_prey_distance(tr, 0, i, 2), best, 1e-12);
    }
    envs::JointAction a;
    for (std::size_t i = 0; i < env.agents(); ++i) a.push_back(static_cast<int>(rng.uniform_int(5)));
    env.step(a);
  }
}

TEST(Fairness, ReportPoolsEveryStepAndMatchesOracle) {
  auto config = trainer::parse_train_config(kTinyPredator);
  trainer::Trainer t(config);
  t.iterate();
  FairnessOptions o;
  o.episodes = 4;
  o.seed = 11;
  const auto report = evaluate_fairness(t, o);
  EXPECT_EQ(report.episodes, 4u);
  EXPECT_EQ(report.records.size(), 4u * 10u * 3u);
  std::vector<double> c, d;
  for (const auto& r : report.records) {
    c.push_back(r.credit);
    d.push_back(r.inverse_distance);
    EXPECT_GT(r.inverse_distance, 0.0);
  }
  ASSERT_FALSE(report.correlation.degenerate);
  EXPECT_NEAR(report.correlation.r, two_pass_r(c, d), 1e-12);
  // Same options, same report.
  const auto again = evaluate_fairness(t, o);
  EXPECT_EQ(again.correlation.r, report.correlation.r);

  std::stringstream csv;
  write_fairness_csv(csv, report);
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "# config_hash=" + trainer::config_hash(config));
  std::getline(csv, line);
  EXPECT_EQ(line, "episode,t,agent,credit,inverse_distance");
}

TEST(Fairness, ConstantCreditsReportDegenerate) {
  trainer::Trainer t(trainer::parse_train_config(kTinyPredator));
  auto& head = t.model().head();
  for (auto& w : head.weight.mutable_data()) w = 0.0;
  for (auto& b : head.bias.mutable_data()) b = 0.0;
  FairnessOptions o;
  o.episodes = 2;
  EXPECT_TRUE(evaluate_fairness(t, o).correlation.degenerate);
}

TEST(Fairness, RefusesOtherScenarios) {
  trainer::Trainer t(trainer::parse_train_config(kTinyAlice));
  FairnessOptions o;
  o.episodes = 1;
  EXPECT_THROW(evaluate_fairness(t, o), ValidationError);
}

TEST(Synthetic, ReturnsEqualHiddenSumsExactly) {
  for (auto kind : {SyntheticKind::Planted, SyntheticKind::SingleCell, SyntheticKind::Zero}) {
    SyntheticSpec spec;
    spec.kind = kind;
    spec.train_episodes = 200;
    spec.heldout_episodes = 50;
    const auto task = SyntheticTask::generate(spec);
    ASSERT_EQ(task.train.size(), 200u);
    ASSERT_EQ(task.heldout.size(), 50u);
    double total = 0.0;
    for (const auto* split : {&task.train, &task.heldout}) {
      for (const auto& e : *split) {
        double s = 0.0;
        for (double r : e.rewards) s += r;
        EXPECT_EQ(e.trajectory.episodic_return, s);
        EXPECT_EQ(e.rewards.size(), 16u * 3u);
        EXPECT_EQ(e.trajectory.length(), 16u);
        total += s;
        if (kind == SyntheticKind::SingleCell) {
          for (std::size_t c = 1; c < e.rewards.size(); ++c) EXPECT_EQ(e.rewards[c], 0.0);
        }
      }
    }
    if (kind == SyntheticKind::Zero) EXPECT_EQ(total, 0.0);
    else EXPECT_GT(total, 0.0);
  }
}

TEST(Synthetic, PlantedRateNearOneSixteenth) {
  SyntheticSpec spec;
  spec.train_episodes = 2000;
  spec.heldout_episodes = 0;
  const auto task = SyntheticTask::generate(spec);
  double hits = 0, cells = 0;
  for (const auto& e : task.train) {
    for (double r : e.rewards) hits += r;
    cells += e.rewards.size();
  }
  const double p = 1.0 / 16.0;
  EXPECT_NEAR(hits / cells, p, 4.0 * std::sqrt(p * (1 - p) / cells));
}

TEST(Synthetic, SplitsAreDisjointStreams) {
  SyntheticSpec spec;
  spec.train_episodes = 5;
  spec.heldout_episodes = 5;
  const auto a = SyntheticTask::generate(spec);
  const auto b = SyntheticTask::generate(spec);
  EXPECT_EQ(a.train[0].trajectory.states, b.train[0].trajectory.states);
  EXPECT_NE(a.train[0].trajectory.states, a.heldout[0].trajectory.states);
}

TEST(Synthetic, ZeroReturnsFitBelowTolerance) {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::Zero;
  spec.train_episodes = 16;
  spec.heldout_episodes = 16;
  SyntheticTraining tr;
  tr.optimizer.learning_rate = 3e-2;
  tr.model.d_model = 8;
  tr.model.heads = 2;
  tr.model.ff_width = 16;
  tr.model.k_samples = 2;
  tr.batch = 16;
  tr.max_steps = 1500;
  tr.time_budget_seconds = 0;
  const auto report = run_synthetic(SyntheticTask::generate(spec), tr);
  std::cout << "zero-task loss " << report.final_loss << '\n';
  EXPECT_LT(report.final_loss, 1e-6);
  EXPECT_TRUE(report.correlation.degenerate);
}

TEST(Synthetic, ConfigParsingAndErrors) {
  const auto c = parse_synthetic_config("synthetic:\n  kind: single_cell\n  max_steps: 7\ndecomposer:\n  d_model: 16\n",
                                        {"synthetic.seed=4", "decomposer.k_samples=5"});
  EXPECT_EQ(c.spec.kind, SyntheticKind::SingleCell);
  EXPECT_EQ(c.training.max_steps, 7u);
  EXPECT_EQ(c.spec.seed, 4u);
  EXPECT_EQ(c.training.model.d_model, 16u);
  EXPECT_EQ(c.training.model.k_samples, 5u);
  EXPECT_EQ(c.training.model.horizon, 16u);
  try {
    parse_synthetic_config("synthetic:\n  bogus: 1\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "synthetic.bogus");
  }
  try {
    parse_synthetic_config("policy:\n  hidden: 3\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "policy");
  }
  EXPECT_NE(synthetic_config_hash(c), synthetic_config_hash(parse_synthetic_config("")));
}

namespace {

void fake_run(const fs::path& dir, const std::string& scenario, const std::vector<std::string>& rows) {
  fs::create_directories(dir);
  write_file(dir / "config.yaml", "env:\n  scenario: " + scenario + "\n");
  std::string text = "# config_hash=abc\niteration,episodes,avg_return\n";
  for (const auto& r : rows) text += r + "\n";
  write_file(dir / "metrics.csv", text);
}

}  // namespace

TEST(PlotData, AggregatesThreeSeedsLikeHandComputation) {
  const auto root = scratch("plot3");
  fake_run(root / "a", "alice_bob", {"0,16,1.0", "1,32,2.0", "2,48,4.0"});
  fake_run(root / "b", "alice_bob", {"0,16,3.0", "1,32,2.0", "2,48,1.0"});
  fake_run(root / "c", "alice_bob", {"0,16,2.0", "1,32,5.0"});
  std::string hash;
  const auto s = aggregate_runs({(root / "a").string(), (root / "b").string(), (root / "c").string()}, &hash);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[1].metric, "avg_return");
  ASSERT_EQ(s[1].iteration.size(), 2u);  // iteration 2 is missing from run c
  EXPECT_DOUBLE_EQ(s[1].mean[0], 2.0);
  EXPECT_NEAR(s[1].std[0], std::sqrt(2.0 / 3.0), 1e-15);
  EXPECT_DOUBLE_EQ(s[1].mean[1], 3.0);
  EXPECT_NEAR(s[1].std[1], std::sqrt(2.0), 1e-15);
  EXPECT_EQ(hash, "abc");

  const auto paths = write_plot_data(s, (root / "out").string(), hash);
  ASSERT_EQ(paths.size(), 2u);
  std::ifstream in(root / "out" / "avg_return.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "# config_hash=abc");
  std::getline(in, line);
  EXPECT_EQ(line, "iteration,mean,std");
}

TEST(PlotData, SingleRunHasZeroStd) {
  const auto root = scratch("plot1");
  fake_run(root / "a", "predator_prey", {"0,16,1.5", "1,32,-2.0"});
  const auto s = aggregate_runs({(root / "a").string()});
  for (const auto& m : s)
    for (double v : m.std) EXPECT_EQ(v, 0.0);
}

TEST(PlotData, TenRowsMatchIndependentRecomputation) {
  const auto root = scratch("plot10");
  Rng rng(8);
  std::vector<std::vector<double>> vals(3, std::vector<double>(10));
  for (int r = 0; r < 3; ++r) {
    std::vector<std::string> rows;
    for (int k = 0; k < 10; ++k) {
      vals[r][k] = rng.normal() * 10.0;
      char buf[64];
      std::snprintf(buf, sizeof buf, "%d,%d,%.17g", k, 16 * k, vals[r][k]);
      rows.push_back(buf);
    }
    fake_run(root / std::to_string(r), "alice_bob", rows);
  }
  const auto s = aggregate_runs({(root / "0").string(), (root / "1").string(), (root / "2").string()});
  for (int k = 0; k < 10; ++k) {
    const double m = (vals[0][k] + vals[1][k] + vals[2][k]) / 3.0;
    double v = 0;
    for (int r = 0; r < 3; ++r) v += (vals[r][k] - m) * (vals[r][k] - m);
    EXPECT_NEAR(s[1].mean[k], m, 1e-12);
    EXPECT_NEAR(s[1].std[k], std::sqrt(v / 3.0), 1e-12);
  }
}

TEST(PlotData, RefusesMismatchedScenarios) {
  const auto root = scratch("plotmix");
  fake_run(root / "a", "alice_bob", {"0,16,1.0"});
  fake_run(root / "b", "predator_prey", {"0,16,1.0"});
  EXPECT_THROW(aggregate_runs({(root / "a").string(), (root / "b").string()}), ValidationError);
}

TEST(Replay, CreditTableMatchesDirectPrediction) {
  trainer::Trainer t(trainer::parse_train_config(kTinyAlice));
  t.iterate();
  const auto logged = buffered_trajectories(t, 3);
  ASSERT_EQ(logged.size(), 3u);
  ReplayOptions o;
  o.seed = 21;
  std::stringstream csv;
  replay_credits(t, logged, o, csv);

  std::vector<const envs::Trajectory*> batch;
  for (const auto& tr : logged) batch.push_back(&tr);
  Rng rng(21);
  const auto expected = t.model().predict_credits(batch, t.config().decomposer.k_samples, rng);

  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "# config_hash=" + trainer::config_hash(t.config()));
  std::getline(csv, line);
  EXPECT_EQ(line, "episode,t,agent,credit");
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    std::size_t e, step, agent;
    double credit;
    ASSERT_EQ(std::sscanf(line.c_str(), "%zu,%zu,%zu,%lf", &e, &step, &agent, &credit), 4);
    EXPECT_EQ(credit, expected[e].at(step, agent));
    ++rows;
  }
  std::size_t cells = 0;
  for (const auto& tr : logged) cells += tr.length() * tr.agents;
  EXPECT_EQ(rows, cells);

  auto wrong = logged;
  wrong[0].scenario = "predator_prey";
  std::stringstream sink;
  EXPECT_THROW(replay_credits(t, wrong, o, sink), ValidationError);
}
