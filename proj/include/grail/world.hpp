#pragma once

#include <algorithm>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "grail/arm.hpp"
#include "grail/core.hpp"

namespace grail {

inline constexpr std::size_t kMaxGoals = 16;

struct Goal {
  std::string label;
  Point2 position;
};

struct DependencyRule {
  GoalId goal;
  std::vector<GoalId> requires_on;  // all must be lit
  std::vector<GoalId> blocked_by;   // any lit forbids
  std::optional<double> requires_context;
};

enum class ResetPolicy : std::uint8_t { per_trial, per_epoch };

struct ScenarioSpec {
  std::string name;
  std::vector<Goal> goals;
  std::vector<DependencyRule> rules;  // indexed by goal
  double context_prob_on = 0.0;
  std::size_t trials_per_epoch = 1;
  std::size_t total_trials = 1;
  ResetPolicy reset_policy = ResetPolicy::per_trial;
  ArmConfig arm;

  std::size_t num_goals() const { return goals.size(); }
  std::size_t num_epochs() const { return total_trials / trials_per_epoch; }

  const std::string& label(GoalId g) const { return goals.at(g.index).label; }

  GoalId goal_by_label(const std::string& label) const {
    for (std::size_t i = 0; i < goals.size(); ++i)
      if (goals[i].label == label) return GoalId{i};
    throw ConfigError("unknown goal '" + label + "'");
  }

  const DependencyRule& rule(GoalId g) const {
    if (g.index >= rules.size()) throw ConfigError("unknown goal index " + std::to_string(g.index));
    return rules[g.index];
  }
};

struct WorldState {
  std::vector<bool> sphere_on;
  double context_feature = 0.0;

  friend bool operator==(const WorldState&, const WorldState&) = default;

  bool is_on(GoalId g) const { return sphere_on.at(g.index); }
  std::size_t num_on() const { return static_cast<std::size_t>(std::count(sphere_on.begin(), sphere_on.end(), true)); }

  std::uint32_t mask() const {
    std::uint32_t m = 0;
    for (std::size_t i = 0; i < sphere_on.size(); ++i)
      if (sphere_on[i]) m |= (1u << i);
    return m;
  }

  static WorldState from_mask(std::uint32_t mask, std::size_t n, double cf = 0.0) {
    WorldState s{std::vector<bool>(n, false), cf};
    for (std::size_t i = 0; i < n; ++i) s.sphere_on[i] = (mask >> i) & 1u;
    return s;
  }
};

inline WorldState all_off(const ScenarioSpec& spec, double cf = 0.0) {
  return WorldState{std::vector<bool>(spec.num_goals(), false), cf};
}

inline bool is_achievable(const ScenarioSpec& spec, GoalId goal, const WorldState& state) {
  const DependencyRule& r = spec.rule(goal);
  if (state.is_on(goal)) return false;
  for (GoalId q : r.requires_on)
    if (!state.is_on(q)) return false;
  for (GoalId q : r.blocked_by)
    if (state.is_on(q)) return false;
  if (r.requires_context && *r.requires_context != state.context_feature) return false;
  return true;
}

struct TouchResult {
  WorldState state;
  bool achieved = false;
};

inline TouchResult apply_touch(const ScenarioSpec& spec, GoalId goal, const WorldState& state) {
  TouchResult out{state, false};
  if (is_achievable(spec, goal, state)) {
    out.state.sphere_on[goal.index] = true;
    out.achieved = true;
  }
  return out;
}

inline WorldState reset(const ScenarioSpec& spec, Rng& rng) {
  std::bernoulli_distribution on(spec.context_prob_on);
  // Always draw so the stream does not depend on context_prob_on being 0.
  const bool cf = on(rng);
  return all_off(spec, cf ? 1.0 : 0.0);
}

// True when trial `trial` (0-based) starts with a fresh environment.
inline bool resets_before(const ScenarioSpec& spec, std::size_t trial) {
  if (spec.reset_policy == ResetPolicy::per_trial) return true;
  return trial % spec.trials_per_epoch == 0;
}

// True when trial `trial` is the last one before a reset.
inline bool ends_epoch(const ScenarioSpec& spec, std::size_t trial) {
  if (spec.reset_policy == ResetPolicy::per_trial) return true;
  return (trial + 1) % spec.trials_per_epoch == 0;
}

// Six points evenly spaced on an arc in front of the two arms.
inline std::vector<Point2> default_sphere_positions(std::size_t n, double radius = 0.6) {
  std::vector<Point2> out;
  const double lo = std::numbers::pi / 6.0;
  const double hi = 5.0 * std::numbers::pi / 6.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = n == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(n - 1);
    const double ang = lo + t * (hi - lo);
    out.push_back({radius * std::cos(ang), radius * std::sin(ang)});
  }
  return out;
}

namespace detail {

inline ScenarioSpec six_unconditioned(std::string name) {
  ScenarioSpec s;
  s.name = std::move(name);
  const auto pos = default_sphere_positions(6);
  for (std::size_t i = 0; i < 6; ++i) {
    s.goals.push_back({std::string(1, static_cast<char>('a' + i)), pos[i]});
    s.rules.push_back({GoalId{i}, {}, {}, std::nullopt});
  }
  return s;
}

}  // namespace detail

inline ScenarioSpec builtin_scenario(int id) {
  switch (id) {
    case 1: {
      auto s = detail::six_unconditioned("independent");
      s.total_trials = 3000;
      return s;
    }
    case 2: {
      auto s = detail::six_unconditioned("contextual");
      s.context_prob_on = 0.5;
      s.total_trials = 4000;
      for (std::size_t i = 0; i < 6; ++i) s.rules[i].requires_context = (i % 2 == 0) ? 1.0 : 0.0;
      return s;
    }
    case 3: {
      auto s = detail::six_unconditioned("interrelated");
      s.trials_per_epoch = 3;
      s.total_trials = 6000;
      s.reset_policy = ResetPolicy::per_epoch;
      const GoalId a{0}, b{1}, c{2}, d{3}, e{4}, f{5};
      s.rules[d.index].blocked_by = {b};
      s.rules[c.index].requires_on = {d};
      s.rules[e.index].requires_on = {c};
      s.rules[b.index].blocked_by = {d};
      s.rules[f.index].requires_on = {b};
      s.rules[a.index].requires_on = {f};
      return s;
    }
    default:
      throw ConfigError("unknown builtin scenario " + std::to_string(id) + " (valid: 1, 2, 3)");
  }
}

// One always-achievable sphere; used to exercise the actor-critic experts alone.
inline ScenarioSpec single_goal_scenario(std::size_t total_trials) {
  ScenarioSpec s;
  s.name = "single";
  s.goals.push_back({"a", default_sphere_positions(6)[2]});
  s.rules.push_back({GoalId{0}, {}, {}, std::nullopt});
  s.total_trials = total_trials;
  return s;
}

// Returns the goal cycle along requires_on edges as labels ("a", "b", "a"), or
// empty when the graph is acyclic.
inline std::vector<std::string> find_requirement_cycle(const ScenarioSpec& spec) {
  const std::size_t n = spec.num_goals();
  std::vector<int> color(n, 0);  // 0 new, 1 on stack, 2 done
  std::vector<std::size_t> stack;
  std::vector<std::string> cycle;

  auto dfs = [&](auto&& self, std::size_t u) -> bool {
    color[u] = 1;
    stack.push_back(u);
    for (GoalId v : spec.rules[u].requires_on) {
      if (v.index >= n) continue;
      if (color[v.index] == 1) {
        auto it = std::find(stack.begin(), stack.end(), v.index);
        for (; it != stack.end(); ++it) cycle.push_back(spec.goals[*it].label);
        cycle.push_back(spec.goals[v.index].label);
        return true;
      }
      if (color[v.index] == 0 && self(self, v.index)) return true;
    }
    stack.pop_back();
    color[u] = 2;
    return false;
  };
  for (std::size_t u = 0; u < n; ++u)
    if (color[u] == 0 && dfs(dfs, u)) return cycle;
  return {};
}

inline void validate_rules(const ScenarioSpec& spec) {
  const std::size_t n = spec.num_goals();
  if (n == 0) throw ConfigError("scenario has no goals");
  if (n > kMaxGoals) throw ConfigError("scenario has more than " + std::to_string(kMaxGoals) + " goals");
  for (std::size_t i = 0; i < n; ++i) {
    if (spec.goals[i].label.empty()) throw ConfigError("goal " + std::to_string(i) + " has an empty label");
    for (std::size_t j = i + 1; j < n; ++j)
      if (spec.goals[i].label == spec.goals[j].label)
        throw ConfigError("duplicate goal label '" + spec.goals[i].label + "'");
  }
  if (spec.rules.size() != n) throw ConfigError("scenario needs exactly one dependency rule per goal");
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = spec.rules[i];
    const auto& lbl = spec.goals[i].label;
    if (r.goal.index != i) throw ConfigError("dependency rule " + std::to_string(i) + " is out of order");
    for (GoalId q : r.requires_on) {
      if (q.index >= n) throw ConfigError("rule for '" + lbl + "' requires an unknown goal");
      if (q == r.goal) throw ConfigError("goal '" + lbl + "' requires itself");
    }
    for (GoalId q : r.blocked_by) {
      if (q.index >= n) throw ConfigError("rule for '" + lbl + "' is blocked by an unknown goal");
      if (std::find(r.requires_on.begin(), r.requires_on.end(), q) != r.requires_on.end())
        throw ConfigError("goal '" + lbl + "' both requires and is blocked by '" + spec.goals[q.index].label + "'");
    }
    if (r.requires_context && *r.requires_context != 0.0 && *r.requires_context != 1.0)
      throw ConfigError("goal '" + lbl + "' requires_context must be 0.0 or 1.0");
  }
  if (auto cyc = find_requirement_cycle(spec); !cyc.empty()) {
    std::string path;
    for (std::size_t i = 0; i < cyc.size(); ++i) path += (i ? " -> " : "") + cyc[i];
    throw ConfigError("cyclic requires_on chain: " + path);
  }
  if (!(spec.context_prob_on >= 0.0 && spec.context_prob_on <= 1.0))
    throw ConfigError("context_prob_on must lie in [0, 1]");
  if (spec.trials_per_epoch == 0) throw ConfigError("trials_per_epoch must be positive");
  if (spec.total_trials == 0) throw ConfigError("total_trials must be positive");
  if (spec.total_trials % spec.trials_per_epoch != 0)
    throw ConfigError("total_trials must be divisible by trials_per_epoch");
  spec.arm.validate();
}

inline void check_reachability(const ScenarioSpec& spec) {
  for (const auto& g : spec.goals)
    for (Side side : {Side::left, Side::right})
      if (!is_reachable(g.position, default_placement(side), spec.arm))
        throw ConfigError("sphere '" + g.label + "' is outside the reach of the " + to_string(side) + " arm");
}

inline void validate(const ScenarioSpec& spec) {
  validate_rules(spec);
  check_reachability(spec);
}

}  // namespace grail
