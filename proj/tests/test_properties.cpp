#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "generators.hpp"
#include "grail/experiment.hpp"

using namespace grail;

TEST(Property, SoftmaxNormalizedAndArgmaxConsistent) {
  gen::Source g(101);
  for (int t = 0; t < 5000; ++t) {
    const auto v = g.values(1 + g.index(12));
    const SoftmaxRule rule{g.temperature()};
    const auto p = rule.probabilities(v);
    const double sum = std::accumulate(p.begin(), p.end(), 0.0);
    ASSERT_NEAR(sum, 1.0, 1e-12);
    for (double x : p) ASSERT_TRUE(x >= 0.0 && x <= 1.0);
    const auto top = std::max_element(v.begin(), v.end()) - v.begin();
    if (std::count(v.begin(), v.end(), v[top]) == 1) {
      ASSERT_EQ(std::max_element(p.begin(), p.end()) - p.begin(), top);
    }
  }
}

TEST(Property, ValueUpdatesTouchOneCell) {
  gen::Source g(102);
  for (Strategy s : {Strategy::bandit, Strategy::contextual, Strategy::q_learning}) {
    GoalSelector sel(s, 6, ContextKeying::full_state);
    for (int t = 0; t < 2000; ++t) {
      const auto st = g.state(6), nx = g.state(6);
      const ContextKey key = sel.key(st);
      const GoalId goal{g.index(6)};
      const auto before = sel.table().rows();
      sel.update(key, goal, g.uniform(0.0, 0.1), sel.key(nx), g.coin());
      const auto& after = sel.table().rows();
      const ContextKey touched = s == Strategy::bandit ? 0 : key;
      for (const auto& [k, row] : after)
        for (std::size_t i = 0; i < row.size(); ++i) {
          if (k == touched && i == goal.index) continue;
          auto it = before.find(k);
          const double old = it == before.end() ? 0.0 : it->second[i];
          ASSERT_EQ(row[i], old);
        }
    }
  }
}

TEST(Property, PredictorStaysInUnitInterval) {
  gen::Source g(103);
  for (int run = 0; run < 50; ++run) {
    PredictorParams p;
    p.learning_rate = g.uniform(0.0, 1.0);
    p.initial = g.uniform(0.0, 1.0);
    p.reward_rule = g.coin() ? RewardRule::clipped : RewardRule::signed_;
    AchievementPredictor pred(6, ContextKeying::full_state, p);
    for (int t = 0; t < 500; ++t) {
      const auto st = g.state(6);
      const GoalId goal{g.index(6)};
      const double r = pred.update_and_reward(goal, st, g.coin());
      const double v = pred.predict(goal, st);
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
      if (p.reward_rule == RewardRule::clipped) {
        ASSERT_GE(r, 0.0);
      }
    }
  }
}

TEST(Property, ClosedGateIsStrictNoOp) {
  gen::Source g(104);
  const auto spec = single_goal_scenario(10);
  for (int t = 0; t < 200; ++t) {
    Rng init(t);
    IdealizedExpert e(IdealizedParams{}, init);
    e.set_competence(g.uniform(0.0, 1.0));
    const IdealizedExpert before = e;
    Attempt a;
    a.reached_target = g.coin();
    if (a.reached_target) a.touched = GoalId{0};
    e.learn(a, g.uniform(-1.0, 1.0), false);
    ASSERT_EQ(e, before);
  }
  for (int t = 0; t < 10; ++t) {
    Rng init(t), rng(1000 + t);
    ActorCriticExpert e(ActorCriticParams{}, init);
    AttemptContext ctx{&spec, GoalId{0}, g.coin() ? Side::left : Side::right, true, 200};
    const Attempt a = e.attempt(ctx, rng);
    const ActorCriticExpert before = e;
    e.learn(a, g.uniform(-1.0, 1.0), false);
    ASSERT_EQ(e, before);
  }
}

TEST(Property, AchievedImpliesAchievableOnEveryTrial) {
  gen::Source g(105);
  for (int run = 0; run < 12; ++run) {
    ExperimentConfig cfg;
    const int id = 1 + static_cast<int>(g.index(3));
    cfg.scenario = builtin_scenario(id);
    cfg.scenario_id = id;
    cfg.system = static_cast<System>(g.index(3));
    cfg.seed = g.index(1u << 20);
    cfg.replications = 1;
    cfg.temperature = g.temperature();
    cfg.idealized.initial_competence = g.uniform(0.0, 1.0);
    const auto res = run_experiment(cfg);
    for (const auto& r : res.replications[0].records) {
      if (r.achieved) {
        ASSERT_TRUE(r.achievable);
      }
      if (!r.achievable) {
        ASSERT_EQ(r.reward, 0.0);
      }
    }
  }
}

TEST(Property, FixedSeedIsBitwiseReproducible) {
  gen::Source g(106);
  for (int run = 0; run < 4; ++run) {
    ExperimentConfig cfg;
    const int id = 1 + static_cast<int>(g.index(3));
    cfg.scenario = builtin_scenario(id);
    cfg.scenario_id = id;
    cfg.system = static_cast<System>(g.index(3));
    cfg.seed = g.index(1u << 30);
    cfg.replications = 2;
    cfg.dump_values = true;
    const auto a = run_experiment(cfg), b = run_experiment(cfg);
    ASSERT_EQ(render(csv::trials, a), render(csv::trials, b));
    ASSERT_EQ(render(csv::competence, a), render(csv::competence, b));
    ASSERT_EQ(render(csv::training_success, a), render(csv::training_success, b));
    for (std::size_t r = 0; r < 2; ++r) {
      ASSERT_EQ(a.replications[r].values_csv, b.replications[r].values_csv);
      ASSERT_EQ(a.replications[r].predictor_csv, b.replications[r].predictor_csv);
    }
  }
}
