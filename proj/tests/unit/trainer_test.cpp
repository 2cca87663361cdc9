#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "stas/core/errors.hpp"
#include "stas/envs/environment.hpp"
#include "stas/trainer/config_io.hpp"
#include "stas/trainer/trainer.hpp"

using namespace stas;
using namespace stas::trainer;
namespace fs = std::filesystem;

namespace {

const char* kTiny = R"(
env:
  scenario: alice_bob
  horizon: 12
decomposer:
  d_model: 8
  heads: 2
  ff_width: 16
  k_samples: 2
policy:
  hidden: 8
  epochs: 2
trainer:
  seed: 5
  iterations: 4
  episodes_per_iteration: 2
  decomposer_every: 2
  max_inner_epochs: 3
  policy_batch: 2
  decomposer_batch: 4
  buffer_capacity: 16
  warmup_episodes: 4
)";

TrainConfig tiny(const std::vector<std::string>& overrides = {}) {
  return parse_train_config(kTiny, overrides);
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("stas_trainer_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Hidden rewards recomputed by stepping a fresh environment through the
// logged joint actions.
double replay_return(const envs::EnvConfig& config, const envs::Trajectory& tr) {
  auto env = envs::make_environment(config);
  env->reset(derive_seed(tr.seed, 0));
  double total = 0.0;
  for (std::size_t t = 0; t < tr.length(); ++t) {
    envs::JointAction a(tr.actions.begin() + static_cast<std::ptrdiff_t>(t * tr.agents),
                        tr.actions.begin() + static_cast<std::ptrdiff_t>((t + 1) * tr.agents));
    total += env->step(a).hidden_reward;
  }
  return total;
}

}  // namespace

TEST(TrainConfigFile, DefaultsAndScenarioDimensions) {
  const auto c = parse_train_config("env:\n  scenario: alice_bob\n");
  EXPECT_EQ(c.decomposer_every, 5u);
  EXPECT_EQ(c.buffer_capacity, 1000u);
  EXPECT_EQ(c.policy_batch, 32u);
  EXPECT_EQ(c.decomposer_batch, 64u);
  EXPECT_EQ(c.warmup_episodes, 100u);
  EXPECT_EQ(c.max_inner_epochs, 20u);
  EXPECT_DOUBLE_EQ(c.plateau_tolerance, 1e-3);
  EXPECT_EQ(c.plateau_patience, 3u);
  EXPECT_EQ(c.decomposer.state_dim, 4u);
  EXPECT_EQ(c.policy.action_count, 4u);
  EXPECT_EQ(c.env.horizon, 64u);
  EXPECT_DOUBLE_EQ(c.policy.gamma, 0.99);
  EXPECT_DOUBLE_EQ(c.policy.lambda, 0.95);
  EXPECT_DOUBLE_EQ(c.policy.clip, 0.2);
  EXPECT_EQ(c.policy.epochs, 4u);
  EXPECT_DOUBLE_EQ(c.policy.entropy_coef, 0.01);
  EXPECT_EQ(c.policy.hidden, 64u);
  const auto pp = parse_train_config("env:\n  scenario: predator_prey\n");
  EXPECT_EQ(pp.env.horizon, 25u);
  EXPECT_EQ(pp.env.agents, 3u);
}

TEST(TrainConfigFile, SnapshotRoundTripsExactly) {
  const auto c = tiny({"policy.actor_lr=0.00031", "env.gamma=0.97"});
  const std::string y = to_yaml(c);
  const auto again = parse_train_config(y);
  EXPECT_EQ(to_yaml(again), y);
  EXPECT_EQ(again.policy.actor_optimizer.learning_rate, 0.00031);
  EXPECT_EQ(again.policy.gamma, 0.97);
  EXPECT_EQ(config_hash(again), config_hash(c));
}

TEST(TrainConfigFile, OverrideIsRecordedInSnapshot) {
  const auto c = tiny({"decomposer.k_samples=5"});
  EXPECT_EQ(c.decomposer.k_samples, 5u);
  EXPECT_NE(to_yaml(c).find("k_samples: 5"), std::string::npos);
  EXPECT_NE(config_hash(c), config_hash(tiny()));
}

TEST(TrainConfigFile, FieldLevelErrors) {
  auto field_of = [](const std::string& text, std::vector<std::string> ov = {}) {
    try {
      parse_train_config(text, ov);
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  EXPECT_EQ(field_of("trainer:\n  iterations: 3\n"), "env.scenario");
  EXPECT_EQ(field_of("env:\n  scenario: atlantis\n"), "env.scenario");
  EXPECT_EQ(field_of("env:\n  scenario: alice_bob\n  colour: red\n"), "env.colour");
  EXPECT_EQ(field_of("env:\n  scenario: alice_bob\ntrainer:\n  iterations: many\n"),
            "trainer.iterations");
  EXPECT_EQ(field_of("env:\n  scenario: alice_bob\ntrainer:\n  decomposer_every: 0\n"),
            "trainer.decomposer_every");
  EXPECT_EQ(field_of("env:\n  scenario: alice_bob\n", {"decomposer.heads=3"}), "decomposer.heads");
  EXPECT_EQ(field_of("env:\n  scenario: alice_bob\nextra:\n  a: 1\n"), "extra");
  EXPECT_EQ(field_of("env:\n  scenario: alice_bob\n", {"nonsense"}), "nonsense");
  EXPECT_EQ(field_of("env:\n  scenario: alice_bob\n  agents: 3\n"), "env.agents");
}

TEST(TrainConfigFile, PaperFaithfulDropsWarmup) {
  const auto c = tiny({"trainer.paper_faithful=true", "trainer.warmup_episodes=0"});
  EXPECT_EQ(c.warmup_episodes, 0u);
  const auto d = parse_train_config("env:\n  scenario: alice_bob\ntrainer:\n  paper_faithful: true\n");
  EXPECT_EQ(d.warmup_episodes, 0u);
  EXPECT_THROW(tiny({"trainer.paper_faithful=true"}), ConfigError);
}

TEST(Buffer, KeepsLatestEpisodesOldestFirst) {
  ExperienceBuffer buf(40);
  envs::EpisodeRecord e;
  for (int k = 0; k < 50; ++k) {
    e.trajectory.seed = static_cast<std::uint64_t>(k);
    e.trajectory.episodic_return = k;
    buf.push(e);
  }
  EXPECT_EQ(buf.size(), 40u);
  EXPECT_EQ(buf.insertions(), 50u);
  for (std::size_t k = 0; k < 40; ++k) {
    EXPECT_EQ(buf.at(k).trajectory.seed, 10 + k);
    EXPECT_EQ(buf.stored_return(k), static_cast<double>(10 + k));
  }
  const auto last = buf.latest(3);
  ASSERT_EQ(last.size(), 3u);
  EXPECT_EQ(last[0]->trajectory.seed, 47u);
  EXPECT_EQ(last[2]->trajectory.seed, 49u);
  Rng rng(1);
  auto pick = buf.sample(25, rng);
  std::sort(pick.begin(), pick.end());
  EXPECT_EQ(std::adjacent_find(pick.begin(), pick.end()), pick.end());
  EXPECT_EQ(buf.sample(100, rng).size(), 40u);
}

TEST(Buffer, StripsHiddenRewards) {
  ExperienceBuffer buf(2);
  envs::EpisodeRecord e;
  e.trajectory.per_step_true_rewards = std::vector<double>{1.0};
  buf.push(e);
  EXPECT_FALSE(buf.at(0).trajectory.per_step_true_rewards.has_value());
}

TEST(Warmup, FiftyEpisodesIntoFortySlots) {
  Trainer t(tiny({"trainer.warmup_episodes=50", "trainer.buffer_capacity=40"}));
  t.warmup();
  EXPECT_EQ(t.buffer().size(), 40u);
  EXPECT_EQ(t.buffer().insertions(), 50u);
  EXPECT_EQ(t.decomposer_phases(), 1u);
}

TEST(Warmup, ZeroIsAllowed) {
  Trainer t(tiny({"trainer.paper_faithful=true", "trainer.warmup_episodes=0"}));
  t.warmup();
  EXPECT_TRUE(t.buffer().empty());
  EXPECT_EQ(t.decomposer_phases(), 0u);
  t.iterate();
  EXPECT_EQ(t.buffer().size(), 2u);
}

TEST(Warmup, StoredReturnsMatchReplay) {
  Trainer t(tiny({"trainer.warmup_episodes=30", "trainer.buffer_capacity=30"}));
  t.warmup();
  t.iterate();
  for (std::size_t k = 0; k < t.buffer().size(); ++k) {
    const auto& tr = t.buffer().at(k).trajectory;
    EXPECT_NEAR(t.buffer().stored_return(k), replay_return(t.config().env, tr), 1e-12);
    EXPECT_FALSE(tr.per_step_true_rewards.has_value());
  }
}

TEST(Loop, OneOneTwoAccounting) {
  Trainer t(tiny({"trainer.paper_faithful=true", "trainer.warmup_episodes=0",
                  "trainer.decomposer_every=1", "trainer.iterations=2"}));
  const auto a = t.iterate();
  const auto b = t.iterate();
  EXPECT_TRUE(a.decomposer_trained);
  EXPECT_TRUE(b.decomposer_trained);
  EXPECT_EQ(t.decomposer_phases(), 2u);
  EXPECT_EQ(t.policy_updates(0), 2u);
  EXPECT_EQ(t.policy_updates(1), 2u);
  EXPECT_EQ(b.episodes, 4u);
}

TEST(Loop, DecomposerTrainsExactlyWhenIterationDividesByM) {
  Trainer t(tiny({"trainer.decomposer_every=3"}));
  for (std::size_t k = 0; k < 8; ++k) {
    const auto rec = t.iterate();
    EXPECT_EQ(rec.iteration, k);
    EXPECT_EQ(rec.decomposer_trained, k % 3 == 0) << "iteration " << k;
  }
}

TEST(Loop, UniformCreditsSpreadTheReturn) {
  Trainer t(tiny({"trainer.credit_mode=uniform"}));
  t.warmup();
  const auto batch = t.buffer().latest(3);
  const auto credits = t.credits_for(batch);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& tr = batch[b]->trajectory;
    for (double c : credits[b]) {
      EXPECT_DOUBLE_EQ(c, tr.episodic_return / static_cast<double>(tr.agents * tr.length()));
    }
  }
}

TEST(Loop, InnerEpochLossMostlyNonIncreasingOnFrozenBuffer) {
  Trainer t(tiny({"trainer.warmup_episodes=64", "trainer.buffer_capacity=64",
                  "trainer.decomposer_batch=32", "trainer.max_inner_epochs=20",
                  "trainer.plateau_tolerance=0"}));
  t.warmup();
  std::size_t steps = 0, ok = 0;
  for (int phase = 0; phase < 10; ++phase) {
    const auto r = t.train_decomposer();
    for (std::size_t e = 1; e < r.epoch_losses.size(); ++e) {
      ++steps;
      if (r.epoch_losses[e] <= r.epoch_losses[e - 1]) ++ok;
    }
  }
  ASSERT_GT(steps, 0u);
  const double frac = static_cast<double>(ok) / static_cast<double>(steps);
  std::cout << "non-increasing fraction " << frac << " over " << steps << " epochs\n";
  EXPECT_GE(frac, 0.9);
}

TEST(Loop, PlateauRuleStopsEarly) {
  Trainer t(tiny({"trainer.max_inner_epochs=20", "trainer.plateau_tolerance=1e9",
                  "trainer.plateau_patience=3"}));
  t.warmup();
  EXPECT_EQ(t.train_decomposer().epoch_losses.size(), 4u);
}

TEST(Runs, SameSeedSameMetricsBitwise) {
  const auto a = scratch_dir("det_a"), b = scratch_dir("det_b");
  train(tiny(), a.string());
  train(tiny(), b.string());
  const std::string ma = slurp(a / "metrics.csv");
  EXPECT_EQ(ma, slurp(b / "metrics.csv"));
  EXPECT_EQ(ma.rfind("# config_hash=", 0), 0u);
  EXPECT_NE(ma.find("iteration,episodes,avg_return,success_rate,decomposer_loss,entropy_0,entropy_1"),
            std::string::npos);
  EXPECT_TRUE(fs::exists(a / "config.yaml"));
  EXPECT_TRUE(fs::exists(a / "seed.txt"));
  EXPECT_TRUE(fs::exists(a / "checkpoint.bin"));
  const auto c = scratch_dir("det_c");
  train(tiny({"trainer.seed=6"}), c.string());
  EXPECT_NE(ma, slurp(c / "metrics.csv"));
}

TEST(Runs, ResumeContinuesWithoutDiscontinuity) {
  const auto full = scratch_dir("full"), part = scratch_dir("part");
  const auto cfg = tiny({"trainer.iterations=6"});
  train(cfg, full.string());
  RunOptions stop;
  stop.stop_after = 3;
  train(cfg, part.string(), stop);
  // Rows written past the checkpoint are discarded on resume.
  {
    std::ofstream junk(part / "metrics.csv", std::ios::app);
    junk << "3,999,0,0,0,0,0\n";
  }
  resume(part.string());
  EXPECT_EQ(slurp(full / "metrics.csv"), slurp(part / "metrics.csv"));
}

TEST(Runs, CheckpointReloadsBitForBit) {
  Trainer t(tiny());
  t.iterate();
  std::stringstream a;
  t.save(a);
  auto u = Trainer::load(a);
  std::stringstream b;
  u->save(b);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(metrics_row(t.iterate()), metrics_row(u->iterate()));
}

TEST(Runs, FailureLeavesDiagnosticRecord) {
  const auto dir = scratch_dir("fail");
  EXPECT_THROW(train(tiny({"decomposer.learning_rate=1e300", "decomposer.max_grad_norm=0"}),
                     dir.string()),
               Error);
  ASSERT_TRUE(fs::exists(dir / "error.txt"));
  EXPECT_NE(slurp(dir / "error.txt").find("iteration"), std::string::npos);
}
