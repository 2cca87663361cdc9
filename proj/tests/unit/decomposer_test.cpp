#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "chi_square.hpp"
#include "fd_oracle.hpp"
#include "random_trajectory.hpp"
#include "stas/core/errors.hpp"
#include "stas/decomposer/attention.hpp"
#include "stas/decomposer/model.hpp"
#include "stas/shapley/game.hpp"

namespace stas::decomposer {
namespace {

using envs::Trajectory;
using testing::random_trajectory;

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, bool grad = true) {
  std::vector<double> v(r * c);
  for (double& x : v) x = rng.normal();
  return Tensor(Shape{r, c}, std::move(v), grad);
}

// sum(out * weights) so every output entry carries a distinct adjoint.
Tensor weighted_sum(Tape& tape, const Tensor& out, const Tensor& weights) {
  return sum(tape, mul(tape, out, weights));
}

SpatialMasks random_masks(const BatchLayout& layout, std::size_t k, Rng& rng) {
  const std::size_t n = layout.agents();
  SpatialMasks m;
  m.samples = k;
  m.bits.resize(layout.steps() * n * k * n);
  for (std::size_t st = 0; st < layout.steps(); ++st)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t s = 0; s < k; ++s) {
        auto c = sample_coalitions(n, i, 1, rng)[0];
        std::copy(c.bits.begin(), c.bits.end(), m.bits.begin() + ((st * n + i) * k + s) * n);
      }
  return m;
}

// ------------------------------------------------------------ attention ops

TEST(TemporalAttention, GradientsMatchFiniteDifferences) {
  Rng rng(1);
  BatchLayout layout(3, {3, 2});
  Tensor q = random_matrix(layout.rows(), 4, rng), k = random_matrix(layout.rows(), 4, rng),
         v = random_matrix(layout.rows(), 4, rng);
  Tensor w = random_matrix(layout.rows(), 4, rng, false);
  auto report = testing::finite_difference_check(
      [&](Tape& t) { return weighted_sum(t, temporal_attention(t, q, k, v, layout, 2), w); },
      {q, k, v});
  EXPECT_EQ(report.failed, 0u) << "worst " << report.worst_relative_error;
}

TEST(TemporalAttention, SingleStepWeightIsOne) {
  Rng rng(2);
  BatchLayout layout(2, {1});
  Tensor q = random_matrix(2, 4, rng), k = random_matrix(2, 4, rng), v = random_matrix(2, 4, rng);
  auto w = temporal_attention_weights(q, k, layout, 1);
  EXPECT_EQ(w[0][0], 1.0);
  EXPECT_EQ(w[0][1], 1.0);
  Tape tape = Tape::inference();
  Tensor out = temporal_attention(tape, q, k, v, layout, 1);
  for (std::size_t x = 0; x < v.size(); ++x) EXPECT_DOUBLE_EQ(out[x], v[x]);
}

TEST(TemporalAttention, EqualKeysGiveUniformCausalWeights) {
  const std::size_t T = 6;
  BatchLayout layout(1, {T});
  Tensor q = Tensor::filled(Shape{T, 4}, 0.3), k = Tensor::filled(Shape{T, 4}, -0.7);
  auto w = temporal_attention_weights(q, k, layout, 2);
  for (std::size_t h = 0; h < 2; ++h)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t s = 0; s < T; ++s) {
        const double expected = s <= t ? 1.0 / static_cast<double>(t + 1) : 0.0;
        EXPECT_NEAR(w[0][h * T * T + t * T + s], expected, 1e-15);
      }
}

TEST(TemporalAttention, FutureRowsDoNotLeakBackwards) {
  Rng rng(3);
  BatchLayout layout(2, {7});
  Tensor q = random_matrix(14, 8, rng), k = random_matrix(14, 8, rng), v = random_matrix(14, 8, rng);
  Tape t1 = Tape::inference();
  Tensor base = temporal_attention(t1, q, k, v, layout, 2);
  // Perturb step 5 of agent 1 everywhere.
  for (Tensor* m : {&q, &k, &v}) {
    auto d = m->mutable_data();
    for (std::size_t c = 0; c < 8; ++c) d[layout.row(0, 5, 1) * 8 + c] += 1.5;
  }
  Tape t2 = Tape::inference();
  Tensor after = temporal_attention(t2, q, k, v, layout, 2);
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t c = 0; c < 8; ++c) {
        const std::size_t x = layout.row(0, t, i) * 8 + c;
        EXPECT_EQ(std::memcmp(&base.data()[x], &after.data()[x], sizeof(double)), 0);
      }
}

TEST(SpatialAttention, GradientsMatchFiniteDifferencesInBothModes) {
  for (MaskMode mode : {MaskMode::NegInf, MaskMode::Hadamard}) {
    Rng rng(4);
    BatchLayout layout(3, {2, 3});
    Tensor q = random_matrix(layout.rows(), 4, rng), k = random_matrix(layout.rows(), 4, rng),
           v = random_matrix(layout.rows(), 4, rng);
    Tensor w = random_matrix(layout.rows(), 4, rng, false);
    const SpatialMasks masks = random_masks(layout, 3, rng);
    auto report = testing::finite_difference_check(
        [&](Tape& t) {
          return weighted_sum(t, spatial_attention(t, q, k, v, layout, 2, masks, mode), w);
        },
        {q, k, v});
    EXPECT_EQ(report.failed, 0u) << to_string(mode) << " worst " << report.worst_relative_error;
  }
}

TEST(SpatialAttention, ExcludedAgentsGetExactlyZeroWeight) {
  Rng rng(5);
  BatchLayout layout(4, {5});
  Tensor q = random_matrix(layout.rows(), 8, rng), k = random_matrix(layout.rows(), 8, rng);
  const SpatialMasks masks = random_masks(layout, 3, rng);
  auto w = spatial_attention_weights(q, k, layout, 2, masks, MaskMode::NegInf);
  const std::size_t n = 4;
  for (std::size_t st = 0; st < 5; ++st)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t s = 0; s < 3; ++s)
        for (std::size_t h = 0; h < 2; ++h) {
          const unsigned char* m = masks.bits.data() + ((st * n + i) * 3 + s) * n;
          const double* ws = w.data() + (((st * n + i) * 3 + s) * 2 + h) * n;
          double total = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            if (!m[j]) {
              EXPECT_EQ(ws[j], 0.0);
            }
            total += ws[j];
          }
          EXPECT_NEAR(total, 1.0, 1e-12);
        }
}

TEST(SpatialAttention, SingleSurvivorAndIdenticalPair) {
  BatchLayout layout(3, {1});
  Rng rng(6);
  Tensor q = random_matrix(3, 4, rng, false), k = random_matrix(3, 4, rng, false),
         v = random_matrix(3, 4, rng, false);
  // Agents 1 and 2 share keys.
  auto kd = k.mutable_data();
  for (std::size_t c = 0; c < 4; ++c) kd[8 + c] = kd[4 + c];
  SpatialMasks only_self{1, {1, 0, 0, 0, 1, 0, 0, 0, 1}};
  Tape tape = Tape::inference();
  Tensor out = spatial_attention(tape, q, k, v, layout, 1, only_self, MaskMode::NegInf);
  for (std::size_t x = 0; x < v.size(); ++x) EXPECT_EQ(out[x], v[x]);

  SpatialMasks pair{1, {1, 0, 0, 0, 1, 1, 0, 1, 1}};
  auto w = spatial_attention_weights(q, k, layout, 1, pair, MaskMode::NegInf);
  EXPECT_DOUBLE_EQ(w[3 + 1], 0.5);
  EXPECT_DOUBLE_EQ(w[3 + 2], 0.5);
}

TEST(SpatialAttention, ZeroValueJoinerOnlyRenormalises) {
  // Agent 1 has v = 0; joining it scales agent 0's output by w_00.
  BatchLayout layout(2, {1});
  Tensor q = Tensor::matrix({{0.4, -0.2}, {0.1, 0.3}});
  Tensor k = Tensor::matrix({{1.0, 0.5}, {-0.3, 0.8}});
  Tensor v = Tensor::matrix({{2.0, -1.0}, {0.0, 0.0}});
  Tape tape = Tape::inference();
  SpatialMasks alone{1, {1, 0, 0, 1}};
  SpatialMasks joined{1, {1, 1, 1, 1}};
  Tensor a = spatial_attention(tape, q, k, v, layout, 1, alone, MaskMode::NegInf);
  Tensor b = spatial_attention(tape, q, k, v, layout, 1, joined, MaskMode::NegInf);
  const double l0 = (0.4 * 1.0 - 0.2 * 0.5) / std::sqrt(2.0);
  const double l1 = (0.4 * -0.3 - 0.2 * 0.8) / std::sqrt(2.0);
  const double w0 = std::exp(l0) / (std::exp(l0) + std::exp(l1));
  EXPECT_DOUBLE_EQ(a.at(0, 0), 2.0);
  EXPECT_NEAR(b.at(0, 0), 2.0 * w0, 1e-15);
  EXPECT_NEAR(b.at(0, 1), -1.0 * w0, 1e-15);
}

TEST(SpatialAttention, RejectsMasksWithoutFocalAgent) {
  BatchLayout layout(2, {1});
  Rng rng(7);
  Tensor q = random_matrix(2, 2, rng), k = random_matrix(2, 2, rng), v = random_matrix(2, 2, rng);
  Tape tape;
  SpatialMasks bad{1, {0, 1, 0, 1}};
  EXPECT_THROW(spatial_attention(tape, q, k, v, layout, 1, bad, MaskMode::NegInf), ValidationError);
}

// ------------------------------------------------------------ coalitions

TEST(SampleCoalitions, SingleAgentOnlyHasItself) {
  Rng rng(8);
  for (const auto& m : sample_coalitions(1, 0, 7, rng)) {
    EXPECT_EQ(m.bits, std::vector<unsigned char>{1});
  }
}

TEST(SampleCoalitions, TwoAgentsSplitEvenly) {
  Rng rng(9);
  int with_other = 0;
  const int draws = 10000;
  for (const auto& m : sample_coalitions(2, 0, draws, rng)) {
    EXPECT_EQ(m.bits[0], 1);
    with_other += m.bits[1];
  }
  EXPECT_GT(testing::chi_square_p_value({double(draws - with_other), double(with_other)},
                                        {0.5, 0.5}),
            0.01);
}

TEST(SampleCoalitions, SizesFollowPermutationPrefixLaw) {
  for (std::size_t n : {3u, 4u}) {
    Rng rng(10 + n);
    const auto exact = shapley::permutation_prefix_distribution(n, 0);
    std::vector<double> expected(n, 0.0);
    for (std::size_t c = 0; c < exact.size(); ++c) {
      if (exact[c] > 0) expected[static_cast<std::size_t>(std::popcount(c)) - 0] += exact[c];
    }
    std::vector<double> observed(n, 0.0);
    std::vector<double> by_mask(std::size_t{1} << n, 0.0);
    for (const auto& m : sample_coalitions(n, 0, 10000, rng)) {
      std::size_t size = 0, mask = 0;
      for (std::size_t j = 1; j < n; ++j) {
        size += m.bits[j];
        mask |= static_cast<std::size_t>(m.bits[j]) << j;
      }
      observed[size] += 1.0;
      by_mask[mask] += 1.0;
    }
    for (double e : expected) EXPECT_NEAR(e, 1.0 / n, 1e-12);
    EXPECT_GT(testing::chi_square_p_value(observed, expected), 0.01) << "n=" << n;
    // Within a size class every coalition is equally likely.
    std::vector<double> obs, probs;
    for (std::size_t c = 0; c < exact.size(); ++c) {
      if (exact[c] > 0) {
        obs.push_back(by_mask[c]);
        probs.push_back(exact[c]);
      }
    }
    EXPECT_GT(testing::chi_square_p_value(obs, probs), 0.01) << "n=" << n;
  }
}

TEST(SampleCoalitions, UniformSubsetLaw) {
  Rng rng(12);
  std::vector<double> by_mask(8, 0.0);
  for (const auto& m : sample_coalitions(3, 1, 8000, rng, CoalitionSampling::UniformSubset)) {
    EXPECT_EQ(m.bits[1], 1);
    by_mask[m.bits[0] | (m.bits[2] << 2)] += 1.0;
  }
  EXPECT_GT(testing::chi_square_p_value({by_mask[0], by_mask[1], by_mask[4], by_mask[5]},
                                        {0.25, 0.25, 0.25, 0.25}),
            0.01);
}

TEST(SampleCoalitions, AllPermutationsEnumerated) {
  auto all = all_permutation_coalitions(3, 0);
  ASSERT_EQ(all.size(), 6u);
  std::vector<int> sizes(3, 0);
  for (const auto& m : all) ++sizes[m.bits[1] + m.bits[2]];
  EXPECT_EQ(sizes, (std::vector<int>{2, 2, 2}));
}

// ------------------------------------------------------------ model

DecomposerConfig small_config(std::size_t layers = 1) {
  DecomposerConfig c;
  c.state_dim = 3;
  c.action_count = 4;
  c.horizon = 8;
  c.d_model = 8;
  c.heads = 2;
  c.ff_width = 16;
  c.layers = layers;
  c.k_samples = 3;
  return c;
}

std::vector<const Trajectory*> pointers(const std::vector<Trajectory>& v) {
  std::vector<const Trajectory*> out;
  for (const auto& t : v) out.push_back(&t);
  return out;
}

TEST(Decomposer, ConfigValidation) {
  DecomposerConfig c = small_config();
  c.layers = 0;
  EXPECT_THROW(Decomposer(c, 0), ConfigError);
  c = small_config();
  c.heads = 3;
  EXPECT_THROW(Decomposer(c, 0), ConfigError);
}

TEST(Decomposer, EmbeddingShapeAndSharing) {
  Decomposer model(small_config(), 1);
  Rng rng(13);
  Trajectory tr = random_trajectory(2, 5, 3, 4, rng);
  // Agents 0 and 1 identical at t = 2.
  for (std::size_t c = 0; c < 3; ++c) tr.states[(2 * 2 + 1) * 3 + c] = tr.states[(2 * 2) * 3 + c];
  tr.actions[2 * 2 + 1] = tr.actions[2 * 2];
  const Trajectory* one[] = {&tr};
  BatchLayout layout(2, {5});
  Tape tape = Tape::inference();
  Tensor e = model.embed(tape, one, layout);
  ASSERT_EQ(e.shape(), (Shape{10, 8}));
  for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(e.at(layout.row(0, 2, 0), c), e.at(layout.row(0, 2, 1), c));

  Trajectory changed = tr;
  changed.actions[0 * 2 + 0] = (tr.actions[0] + 1) % 4;
  const Trajectory* other[] = {&changed};
  Tensor e2 = model.embed(tape, other, layout);
  bool differs = false;
  for (std::size_t c = 0; c < 8; ++c) {
    differs = differs || e.at(0, c) != e2.at(0, c);
    EXPECT_EQ(e.at(1, c), e2.at(1, c));
  }
  EXPECT_TRUE(differs);
}

TEST(Decomposer, EpisodeLongerThanTableIsConfigError) {
  Decomposer model(small_config(), 1);
  Rng rng(14);
  Trajectory tr = random_trajectory(2, 9, 3, 4, rng);
  EXPECT_THROW(model.predict_credits(tr, 3, rng), ConfigError);
}

TEST(Decomposer, CreditsSumToPredictionExactly) {
  for (std::size_t layers : {1u, 3u}) {
    Decomposer model(small_config(layers), 2);
    Rng rng(15);
    for (int trial = 0; trial < 50; ++trial) {
      Trajectory tr = random_trajectory(3, 1 + rng.uniform_int(8), 3, 4, rng);
      CreditMatrix m = model.predict_credits(tr, 3, rng);
      double total = 0.0;
      for (double c : m.values) total += c;
      EXPECT_EQ(total, m.total);
      EXPECT_EQ(m.steps, tr.length());
    }
  }
}

TEST(Decomposer, ZeroHeadGivesZeroCredits) {
  Decomposer model(small_config(), 3);
  for (double& w : model.head().weight.mutable_data()) w = 0.0;
  Rng rng(16);
  Trajectory tr = random_trajectory(3, 4, 3, 4, rng);
  CreditMatrix m = model.predict_credits(tr, 3, rng);
  for (double c : m.values) EXPECT_EQ(c, 0.0);
  EXPECT_EQ(m.total, 0.0);
}

TEST(Decomposer, SingleAgentSingleStepEqualsShapleyCredit) {
  Decomposer model(small_config(), 4);
  Rng rng(17);
  Trajectory tr = random_trajectory(1, 1, 3, 4, rng);
  CreditMatrix m = model.predict_credits(tr, 5, rng);
  ASSERT_EQ(m.values.size(), 1u);
  const Trajectory* one[] = {&tr};
  BatchLayout layout(1, {1});
  Tape tape = Tape::inference();
  Tensor ctx = model.temporal(tape, model.embed(tape, one, layout), layout, 0);
  EXPECT_NEAR(m.values[0], model.shapley_credit(ctx, 0, 1, rng), 1e-12);
  EXPECT_NEAR(m.values[0], model.shapley_credit(ctx, 0, 9, rng), 1e-12);
}

TEST(Decomposer, LossExamples) {
  Decomposer model(small_config(), 5);
  for (double& w : model.head().weight.mutable_data()) w = 0.0;
  Rng rng(18);
  std::vector<Trajectory> batch = {random_trajectory(2, 4, 3, 4, rng), random_trajectory(2, 4, 3, 4, rng)};
  batch[0].episodic_return = 2.0;
  batch[1].episodic_return = -2.0;
  Tape tape = Tape::inference();
  EXPECT_DOUBLE_EQ(model.decomposition_loss(tape, pointers(batch), 3, rng).item(), 4.0);

  // Constant credit 0.25 over 8 cells reconstructs a return of 2 exactly.
  model.head().bias.mutable_data()[0] = 0.25;
  std::vector<Trajectory> perfect = {batch[0]};
  EXPECT_EQ(model.decomposition_loss(tape, pointers(perfect), 3, rng).item(), 0.0);

  std::vector<Trajectory> empty;
  EXPECT_THROW(model.decomposition_loss(tape, pointers(empty), 3, rng), ContractError);
}

void expect_loss_gradients_match(std::size_t layers, MaskMode mode) {
  DecomposerConfig c = small_config(layers);
  c.mask_mode = mode;
  Decomposer model(c, 6);
  Rng data_rng(19);
  std::vector<Trajectory> batch = {random_trajectory(2, 4, 3, 4, data_rng),
                                   random_trajectory(2, 4, 3, 4, data_rng)};
  const auto ptrs = pointers(batch);
  auto report = testing::finite_difference_check(
      [&](Tape& t) {
        Rng rng(20);
        return model.decomposition_loss(t, ptrs, 3, rng);
      },
      model.parameters());
  EXPECT_EQ(report.failed, 0u) << "L=" << layers << " " << to_string(mode) << " worst "
                               << report.worst_relative_error << " of " << report.checked;
  EXPECT_EQ(report.checked, model.parameter_count());
}

TEST(Decomposer, LossGradientsMatchFiniteDifferences) {
  expect_loss_gradients_match(1, MaskMode::NegInf);
  expect_loss_gradients_match(2, MaskMode::NegInf);
  expect_loss_gradients_match(1, MaskMode::Hadamard);
}

TEST(Decomposer, FutureStepsDoNotChangeEarlierCredits) {
  for (std::size_t layers : {1u, 2u}) {
    Decomposer model(small_config(layers), 7);
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t T = 2 + rng.uniform_int(7);
      Trajectory tr = random_trajectory(3, T, 3, 4, rng);
      const std::size_t cut = rng.uniform_int(T - 1);
      Trajectory perturbed = tr;
      for (std::size_t t = cut + 1; t < T; ++t)
        for (std::size_t i = 0; i < 3; ++i) {
          perturbed.states[(t * 3 + i) * 3] += rng.normal();
          perturbed.actions[t * 3 + i] = static_cast<int>(rng.uniform_int(4));
        }
      Rng r1(99), r2(99);
      CreditMatrix a = model.predict_credits(tr, 3, r1);
      CreditMatrix b = model.predict_credits(perturbed, 3, r2);
      for (std::size_t t = 0; t <= cut; ++t)
        for (std::size_t i = 0; i < 3; ++i) {
          const double x = a.at(t, i), y = b.at(t, i);
          EXPECT_EQ(std::memcmp(&x, &y, sizeof x), 0) << "t=" << t << " cut=" << cut;
        }
    }
  }
}

TEST(Decomposer, RelabellingAgentsPermutesCreditColumns) {
  Decomposer model(small_config(2), 8);
  Rng rng(22);
  const std::size_t n = 3, T = 5;
  Trajectory tr = random_trajectory(n, T, 3, 4, rng);
  const std::size_t perm[] = {2, 0, 1};  // new agent j is old agent perm[j]
  Trajectory relabelled = tr;
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t c = 0; c < 3; ++c) {
        relabelled.states[(t * n + j) * 3 + c] = tr.states[(t * n + perm[j]) * 3 + c];
      }
      relabelled.actions[t * n + j] = tr.actions[t * n + perm[j]];
    }
  std::vector<std::vector<CoalitionMask>> masks(n), moved(n);
  for (std::size_t i = 0; i < n; ++i) masks[i] = sample_coalitions(n, i, 3, rng);
  for (std::size_t j = 0; j < n; ++j) {
    for (const CoalitionMask& m : masks[perm[j]]) {
      CoalitionMask r{j, std::vector<unsigned char>(n)};
      for (std::size_t x = 0; x < n; ++x) r.bits[x] = m.bits[perm[x]];
      moved[j].push_back(r);
    }
  }
  const Trajectory* a[] = {&tr};
  const Trajectory* b[] = {&relabelled};
  BatchLayout layout(n, {T});
  Tape tape = Tape::inference();
  Forward fa = model.forward(tape, a, broadcast_masks(layout, masks));
  Forward fb = model.forward(tape, b, broadcast_masks(layout, moved));
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < n; ++j) {
      EXPECT_NEAR(fb.credits[layout.row(0, t, j)], fa.credits[layout.row(0, t, perm[j])], 1e-12);
    }
}

TEST(Decomposer, FixedSeedIsBitwiseDeterministic) {
  Decomposer m1(small_config(3), 9), m2(small_config(3), 9);
  Rng rng(23);
  Trajectory tr = random_trajectory(3, 6, 3, 4, rng);
  Rng a(5), b(5);
  CreditMatrix x = m1.predict_credits(tr, 3, a);
  CreditMatrix y = m2.predict_credits(tr, 3, b);
  ASSERT_EQ(x.values.size(), y.values.size());
  EXPECT_EQ(std::memcmp(x.values.data(), y.values.data(), x.values.size() * sizeof(double)), 0);
}

TEST(Decomposer, ParameterCountAffineInLayers) {
  const std::size_t p1 = Decomposer(small_config(1), 0).parameter_count();
  const std::size_t p2 = Decomposer(small_config(2), 0).parameter_count();
  const std::size_t p3 = Decomposer(small_config(3), 0).parameter_count();
  const std::size_t p5 = Decomposer(small_config(5), 0).parameter_count();
  EXPECT_GT(p2, p1);
  EXPECT_EQ(p3 - p2, p2 - p1);
  EXPECT_EQ(p5 - p3, 2 * (p2 - p1));
}

TEST(Decomposer, SingleLayerMatchesManualPipeline) {
  Decomposer model(small_config(1), 10);
  Rng rng(24);
  Trajectory tr = random_trajectory(3, 4, 3, 4, rng);
  const Trajectory* one[] = {&tr};
  BatchLayout layout(3, {4});
  Rng r1(3), r2(3);
  Tape tape = Tape::inference();
  const SpatialMasks masks = model.sample_masks(layout, 3, r1);
  Forward f = model.forward(tape, one, 3, r2);
  Tensor manual = model.credit_head(
      tape, model.temporal(tape, model.embed(tape, one, layout), layout, 0), layout, masks);
  ASSERT_EQ(manual.size(), f.credits.size());
  EXPECT_EQ(std::memcmp(manual.data().data(), f.credits.data().data(), manual.size() * sizeof(double)), 0);
}

TEST(Decomposer, ExhaustivePermutationsMatchWeightedOracle) {
  Decomposer model(small_config(1), 11);
  Rng rng(25);
  const std::size_t n = 3, T = 4;
  Trajectory tr = random_trajectory(n, T, 3, 4, rng);
  const Trajectory* one[] = {&tr};
  BatchLayout layout(n, {T});
  std::vector<std::vector<CoalitionMask>> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = all_permutation_coalitions(n, i);
  Tape tape = Tape::inference();
  Forward f = model.forward(tape, one, broadcast_masks(layout, all));
  Tensor ctx = model.temporal(tape, model.embed(tape, one, layout), layout, 0);
  for (std::size_t t = 0; t < T; ++t) {
    const auto first = ctx.data().begin() + layout.row(0, t, 0) * 8;
    std::vector<double> rows(first, first + n * 8);
    Tensor step(Shape{n, 8}, rows);
    for (std::size_t i = 0; i < n; ++i) {
      const auto p = shapley::permutation_prefix_distribution(n, i);
      double oracle = 0.0;
      for (std::size_t c = 0; c < p.size(); ++c) {
        if (p[c] == 0.0) continue;
        CoalitionMask m{i, std::vector<unsigned char>(n, 0)};
        for (std::size_t j = 0; j < n; ++j) m.bits[j] = (c >> j) & 1u;
        m.bits[i] = 1;
        oracle += p[c] * model.marginal_contribution(step, m);
      }
      EXPECT_NEAR(f.credits[layout.row(0, t, i)], oracle, 1e-10);

      // Large-K Monte Carlo mean within 3 standard errors of the exact value.
      std::vector<double> draws;
      for (const auto& m : sample_coalitions(n, i, 4000, rng)) draws.push_back(model.marginal_contribution(step, m));
      const double mu = std::accumulate(draws.begin(), draws.end(), 0.0) / draws.size();
      double var = 0.0;
      for (double x : draws) var += (x - mu) * (x - mu);
      const double se = std::sqrt(var / (draws.size() - 1) / draws.size());
      EXPECT_LE(std::abs(mu - oracle), 3.0 * se + 1e-12);
    }
  }
}

TEST(Decomposer, CheckpointRoundTripAndArchitectureGuard) {
  Decomposer a(small_config(2), 12), b(small_config(2), 13);
  std::stringstream buf;
  a.save(buf);
  b.load(buf);
  auto pa = a.parameters(), pb = b.parameters();
  for (std::size_t k = 0; k < pa.size(); ++k) {
    EXPECT_EQ(std::memcmp(pa[k].data().data(), pb[k].data().data(), pa[k].size() * sizeof(double)), 0);
  }
  std::stringstream again;
  a.save(again);
  Decomposer other(small_config(3), 0);
  EXPECT_THROW(other.load(again), FormatError);
  std::stringstream junk("garbage");
  EXPECT_THROW(b.load(junk), FormatError);
}

TEST(Decomposer, CreditCsvLayout) {
  CreditMatrix m{2, 2, {0.5, -1.0, 0.25, 2.0}, 1.75};
  std::ostringstream out;
  write_credit_csv(out, {m}, 7);
  EXPECT_EQ(out.str(), "episode,t,agent,credit\n7,0,0,0.5\n7,0,1,-1\n7,1,0,0.25\n7,1,1,2\n");
}

}  // namespace
}  // namespace stas::decomposer
