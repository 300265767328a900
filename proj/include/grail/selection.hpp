#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <span>
#include <variant>
#include <vector>

#include "grail/core.hpp"
#include "grail/motivation.hpp"
#include "grail/world.hpp"

namespace grail {

struct SoftmaxRule {
  double temperature = 0.1;

  std::vector<double> probabilities(std::span<const double> values) const {
    if (!(temperature > 0.0)) throw ConfigError("softmax temperature must be > 0");
    std::vector<double> p(values.size());
    if (values.empty()) return p;
    const double top = *std::max_element(values.begin(), values.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      p[i] = std::exp((values[i] - top) / temperature);
      sum += p[i];
    }
    for (double& x : p) x /= sum;
    return p;
  }

  std::size_t sample(std::span<const double> values, Rng& rng) const {
    const auto p = probabilities(values);
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      acc += p[i];
      if (u < acc) return i;
    }
    return p.size() - 1;
  }
};

// Sparse table of per-key goal values, rows materialised on first write.
class ValueTable {
 public:
  explicit ValueTable(std::size_t num_goals) : num_goals_(num_goals) {}

  std::size_t num_goals() const { return num_goals_; }

  std::vector<double> values(ContextKey key) const {
    auto it = rows_.find(key);
    return it == rows_.end() ? std::vector<double>(num_goals_, 0.0) : it->second;
  }

  double at(ContextKey key, GoalId g) const {
    auto it = rows_.find(key);
    return it == rows_.end() ? 0.0 : it->second.at(g.index);
  }

  double max_at(ContextKey key) const {
    auto it = rows_.find(key);
    if (it == rows_.end()) return 0.0;
    return *std::max_element(it->second.begin(), it->second.end());
  }

  double& cell(ContextKey key, GoalId g) {
    if (g.index >= num_goals_) throw ConfigError("value table: unknown goal " + std::to_string(g.index));
    auto [it, inserted] = rows_.try_emplace(key);
    if (inserted) it->second.assign(num_goals_, 0.0);
    return it->second[g.index];
  }

  const std::map<ContextKey, std::vector<double>>& rows() const { return rows_; }

  friend bool operator==(const ValueTable&, const ValueTable&) = default;

 private:
  std::size_t num_goals_;
  std::map<ContextKey, std::vector<double>> rows_;
};

/// Context-free EMA over intrinsic rewards (one value per goal).
struct BanditValues {
  ValueTable table;
  double smoothing = 0.01;

  explicit BanditValues(std::size_t n, double alpha = 0.01) : table(n), smoothing(alpha) {}

  void update(GoalId goal, double reward) {
    double& v = table.cell(0, goal);
    v = (1.0 - smoothing) * v + smoothing * reward;
  }
};

/// One EMA per (context, goal).
struct ContextualValues {
  ValueTable table;
  double smoothing = 0.1;

  explicit ContextualValues(std::size_t n, double alpha = 0.1) : table(n), smoothing(alpha) {}

  void update(ContextKey key, GoalId goal, double reward) {
    double& v = table.cell(key, goal);
    v = (1.0 - smoothing) * v + smoothing * reward;
  }
};

/// Tabular Q-learning over the goal-selection MDP.
struct QValues {
  ValueTable table;
  double learning_rate = 0.1;
  double discount = 0.3;

  explicit QValues(std::size_t n, double alpha = 0.1, double gamma = 0.3)
      : table(n), learning_rate(alpha), discount(gamma) {}

  void update(ContextKey key, GoalId goal, double reward, ContextKey next_key, bool terminal) {
    const double target = terminal ? reward : reward + discount * table.max_at(next_key);
    double& q = table.cell(key, goal);
    q += learning_rate * (target - q);
  }
};

enum class Strategy : std::uint8_t { bandit, contextual, q_learning };

struct SelectorParams {
  double temperature = 0.1;
  double bandit_smoothing = 0.01;
  double contextual_smoothing = 0.1;
  double q_learning_rate = 0.1;
  double q_discount = 0.3;
};

/// The goal selector: a value store plus the shared softmax rule.
class GoalSelector {
 public:
  GoalSelector(Strategy strategy, std::size_t num_goals, ContextKeying keying, SelectorParams params = {})
      : strategy_(strategy),
        keying_(strategy == Strategy::bandit ? ContextKeying::none : keying),
        softmax_{params.temperature},
        store_(make_store(strategy, num_goals, params)) {}

  Strategy strategy() const { return strategy_; }
  ContextKeying keying() const { return keying_; }
  const SoftmaxRule& softmax() const { return softmax_; }

  ContextKey key(const WorldState& s) const { return context_key(s, keying_); }

  std::vector<double> values(const WorldState& s) const { return table().values(key(s)); }

  std::vector<double> probabilities(const WorldState& s) const { return softmax_.probabilities(values(s)); }

  GoalId select(const WorldState& s, Rng& rng) const { return GoalId{softmax_.sample(values(s), rng)}; }

  // One call per trial. next_key/terminal are only used by Q-learning.
  void update(ContextKey key, GoalId goal, double reward, ContextKey next_key, bool terminal) {
    require_finite(reward, "goal selector reward");
    std::visit(
        [&](auto& st) {
          using T = std::decay_t<decltype(st)>;
          if constexpr (std::is_same_v<T, BanditValues>)
            st.update(goal, reward);
          else if constexpr (std::is_same_v<T, ContextualValues>)
            st.update(key, goal, reward);
          else
            st.update(key, goal, reward, next_key, terminal);
        },
        store_);
    require_finite(table().at(key, goal), "goal selector value");
  }

  const ValueTable& table() const {
    return std::visit([](const auto& st) -> const ValueTable& { return st.table; }, store_);
  }

  void write_csv(std::ostream& os, std::size_t replication, std::size_t trial) const {
    for (const auto& [key, vals] : table().rows())
      for (std::size_t g = 0; g < vals.size(); ++g)
        os << replication << ',' << trial << ',' << key << ',' << g << ',' << vals[g] << '\n';
  }

 private:
  using Store = std::variant<BanditValues, ContextualValues, QValues>;

  static Store make_store(Strategy s, std::size_t n, const SelectorParams& p) {
    switch (s) {
      case Strategy::bandit:
        return BanditValues(n, p.bandit_smoothing);
      case Strategy::contextual:
        return ContextualValues(n, p.contextual_smoothing);
      case Strategy::q_learning:
        return QValues(n, p.q_learning_rate, p.q_discount);
    }
    throw ConfigError("unknown selection strategy");
  }

  Strategy strategy_;
  ContextKeying keying_;
  SoftmaxRule softmax_;
  Store store_;
};

}  // namespace grail
