#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "grail/core.hpp"
#include "grail/world.hpp"

namespace grail {

// How a world state is collapsed into a table key for predictors and selectors.
enum class ContextKeying : std::uint8_t {
  none,             // one key for every state
  context_feature,  // cf only
  full_state,       // sphere mask and cf
};

using ContextKey = std::uint32_t;

inline ContextKey context_key(const WorldState& s, ContextKeying k) {
  switch (k) {
    case ContextKeying::none:
      return 0;
    case ContextKeying::context_feature:
      return s.context_feature > 0.5 ? 1u : 0u;
    case ContextKeying::full_state:
      return (s.mask() << 1) | (s.context_feature > 0.5 ? 1u : 0u);
  }
  return 0;
}

enum class RewardRule : std::uint8_t {
  clipped,  // max(0, dP)
  signed_,  // dP
};

struct PredictorParams {
  double learning_rate = 0.1;   // eta
  double gate_threshold = 0.05; // epsilon
  double initial = 0.0;
  RewardRule reward_rule = RewardRule::clipped;
};

/// Tabular estimate of P(goal achieved within the trial | context key).
///
/// The competence-prediction-improvement reward is the change this table
/// undergoes when it absorbs the outcome of a trial.
class AchievementPredictor {
 public:
  AchievementPredictor(std::size_t num_goals, ContextKeying keying, PredictorParams params = {})
      : num_goals_(num_goals), keying_(keying), params_(params) {}

  ContextKeying keying() const { return keying_; }
  const PredictorParams& params() const { return params_; }
  std::size_t num_goals() const { return num_goals_; }

  double predict(GoalId goal, const WorldState& state) const {
    check_goal(goal);
    auto it = table_.find(context_key(state, keying_));
    return it == table_.end() ? params_.initial : it->second[goal.index];
  }

  /// Delta-rule update towards the observed outcome; returns the CPI reward.
  double update_and_reward(GoalId goal, const WorldState& state, bool achieved) {
    check_goal(goal);
    double& p = row(context_key(state, keying_))[goal.index];
    const double before = p;
    const double outcome = achieved ? 1.0 : 0.0;
    p = std::clamp(before + params_.learning_rate * (outcome - before), 0.0, 1.0);
    require_finite(p, "achievement predictor");
    const double delta = p - before;
    return params_.reward_rule == RewardRule::clipped ? std::max(0.0, delta) : delta;
  }

  /// False blocks expert learning: the goal is predicted unachievable here and
  /// was not achieved.
  bool learning_gate(GoalId goal, const WorldState& state, bool achieved) const {
    if (achieved) return true;
    return predict(goal, state) > params_.gate_threshold;
  }

  void write_csv(std::ostream& os) const {
    os << "goal,context_key,P\n";
    for (const auto& [key, vals] : table_)
      for (std::size_t g = 0; g < num_goals_; ++g) os << g << ',' << key << ',' << vals[g] << '\n';
  }

  const std::map<ContextKey, std::vector<double>>& table() const { return table_; }

 private:
  void check_goal(GoalId g) const {
    if (g.index >= num_goals_) throw ConfigError("predictor: unknown goal " + std::to_string(g.index));
  }

  std::vector<double>& row(ContextKey key) {
    auto [it, inserted] = table_.try_emplace(key);
    if (inserted) it->second.assign(num_goals_, params_.initial);
    return it->second;
  }

  std::size_t num_goals_;
  ContextKeying keying_;
  PredictorParams params_;
  std::map<ContextKey, std::vector<double>> table_;
};

}  // namespace grail
