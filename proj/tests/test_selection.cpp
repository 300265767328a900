#include <gtest/gtest.h>

#include <cmath>

#include "grail/selection.hpp"
#include "oracles.hpp"

using namespace grail;

TEST(Softmax, UniformOnEqualValues) {
  const std::vector<double> v(6, 0.3);
  for (double p : SoftmaxRule{0.1}.probabilities(v)) EXPECT_NEAR(p, 1.0 / 6.0, 1e-15);
}

TEST(Softmax, SingleLeader) {
  const std::vector<double> v{0.5, 0, 0, 0, 0, 0};
  const double expect = std::exp(5.0) / (std::exp(5.0) + 5.0);
  EXPECT_NEAR(SoftmaxRule{0.1}.probabilities(v)[0], expect, 1e-12);
  EXPECT_NEAR(expect, 0.9674, 1e-4);
}

TEST(Softmax, HugeTemperatureIsUniform) {
  const std::vector<double> v{0.9, 0.1, 0.3, 0, 0.5, 0.2};
  for (double p : SoftmaxRule{1e12}.probabilities(v)) EXPECT_NEAR(p, 1.0 / 6.0, 1e-9);
}

TEST(Softmax, SampleFrequencies) {
  const std::vector<double> v{0.5, 0, 0, 0, 0, 0};
  Rng rng(2);
  int first = 0;
  for (int i = 0; i < 20000; ++i) first += SoftmaxRule{0.1}.sample(v, rng) == 0;
  EXPECT_NEAR(first / 20000.0, 0.9674, 0.01);
}

TEST(Softmax, RejectsNonPositiveTemperature) {
  const std::vector<double> v{0.0, 1.0};
  EXPECT_THROW(SoftmaxRule{0.0}.probabilities(v), ConfigError);
}

TEST(Bandit, EmaExamples) {
  BanditValues b(6);
  b.update(GoalId{0}, 1.0);
  EXPECT_NEAR(b.table.at(0, GoalId{0}), 0.01, 1e-15);

  BanditValues c(6);
  for (int i = 0; i < 1000; ++i) c.update(GoalId{1}, 0.4);
  EXPECT_LT(std::abs(c.table.at(0, GoalId{1}) - 0.4), 0.01);

  const double before = c.table.at(0, GoalId{1});
  c.update(GoalId{1}, before);
  EXPECT_DOUBLE_EQ(c.table.at(0, GoalId{1}), before);
}

TEST(Contextual, CellExample) {
  ContextualValues v(6);
  v.update(1, GoalId{0}, 0.5);
  EXPECT_NEAR(v.table.at(1, GoalId{0}), 0.05, 1e-15);
  EXPECT_EQ(v.table.at(0, GoalId{0}), 0.0);
}

TEST(QLearning, Examples) {
  QValues q(6);
  q.update(0, GoalId{0}, 0.5, 2, false);
  EXPECT_NEAR(q.table.at(0, GoalId{0}), 0.05, 1e-15);

  QValues p(6);
  p.table.cell(8, GoalId{2}) = 1.0;
  p.update(0, GoalId{3}, 0.0, 8, false);
  EXPECT_NEAR(p.table.at(0, GoalId{3}), 0.03, 1e-15);

  QValues t(6);
  t.table.cell(8, GoalId{2}) = 1.0;
  t.update(0, GoalId{3}, 0.0, 8, true);
  EXPECT_EQ(t.table.at(0, GoalId{3}), 0.0);
}

TEST(QLearning, ChainConvergesToValueIteration) {
  const auto vi = oracle::value_iteration(0.3);
  QValues q(6, 0.1, 0.3);
  for (int sweep = 0; sweep < 600; ++sweep)
    for (std::size_t s = 0; s < oracle::ChainMdp::kStates; ++s)
      for (std::size_t g = 0; g < 6; ++g)
        q.update(static_cast<ContextKey>(s), GoalId{g}, oracle::ChainMdp::reward(s, g),
                 static_cast<ContextKey>(oracle::ChainMdp::next(s, g)), false);
  double err = 0;
  for (std::size_t s = 0; s < oracle::ChainMdp::kStates; ++s)
    for (std::size_t g = 0; g < 6; ++g) err = std::max(err, std::abs(q.table.at(static_cast<ContextKey>(s), GoalId{g}) - vi[s][g]));
  EXPECT_LT(err, 1e-6);

  const ContextKey start = 0, d_on = (1u << 3) << 1, dc_on = ((1u << 3) | (1u << 2)) << 1;
  EXPECT_NEAR(q.table.at(start, GoalId{3}), 0.09, 1e-6);
  EXPECT_NEAR(q.table.at(d_on, GoalId{2}), 0.3, 1e-6);
  EXPECT_NEAR(q.table.at(dc_on, GoalId{4}), 1.0, 1e-6);
}

TEST(QLearning, ValueReachesChainStartWhileBanditDoesNot) {
  QValues q(6, 0.1, 0.3);
  BanditValues b(6);
  const ContextKey start = 0, d_on = (1u << 3) << 1, dc_on = ((1u << 3) | (1u << 2)) << 1, dce = ((1u << 3) | (1u << 2) | (1u << 4)) << 1;
  for (int ep = 0; ep < 2000; ++ep) {
    q.update(start, GoalId{3}, 0.0, d_on, false);
    q.update(d_on, GoalId{2}, 0.0, dc_on, false);
    q.update(dc_on, GoalId{4}, 1.0, dce, true);
    b.update(GoalId{3}, 0.0);
    b.update(GoalId{2}, 0.0);
    b.update(GoalId{4}, 1.0);
  }
  EXPECT_GT(q.table.at(start, GoalId{3}), 0.0);
  EXPECT_NEAR(q.table.at(start, GoalId{3}), 0.09, 1e-9);
  EXPECT_EQ(b.table.at(0, GoalId{3}), 0.0);
}

TEST(GoalSelector, BanditIgnoresContext) {
  GoalSelector s(Strategy::bandit, 6, ContextKeying::full_state);
  EXPECT_EQ(s.keying(), ContextKeying::none);
  s.update(0, GoalId{2}, 1.0, 0, true);
  EXPECT_EQ(s.values(WorldState::from_mask(5, 6, 1.0)), s.values(WorldState::from_mask(0, 6)));
}

TEST(GoalSelector, SelectIsArgmaxConsistent) {
  GoalSelector s(Strategy::contextual, 6, ContextKeying::full_state, {0.05});
  const auto st = WorldState::from_mask(0, 6);
  s.update(s.key(st), GoalId{4}, 1.0, 0, true);
  const auto p = s.probabilities(st);
  EXPECT_EQ(std::max_element(p.begin(), p.end()) - p.begin(), 4);
}

TEST(GoalSelector, RejectsNonFiniteReward) {
  GoalSelector s(Strategy::q_learning, 6, ContextKeying::full_state);
  EXPECT_THROW(s.update(0, GoalId{0}, std::nan(""), 0, false), NumericError);
}
