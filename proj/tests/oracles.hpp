#pragma once

// Reference implementations used only by the tests. They share no code with
// the library beyond plain data types.

#include <algorithm>
#include <array>
#include <cstdint>
#include <vector>

namespace oracle {

// Scenario-3 dependency rules written out by label: d -> c -> e, b -> f -> a,
// d and b exclude each other. Goal index = label - 'a'.
inline bool chain_achievable(std::size_t g, std::uint32_t mask) {
  auto on = [&](char l) { return ((mask >> (l - 'a')) & 1u) != 0; };
  const char label = static_cast<char>('a' + g);
  if (on(label)) return false;
  switch (label) {
    case 'd': return !on('b');
    case 'c': return on('d');
    case 'e': return on('c');
    case 'b': return !on('d');
    case 'f': return on('b');
    case 'a': return on('f');
  }
  return false;
}

struct ChainMdp {
  static constexpr std::size_t kGoals = 6;
  static constexpr std::size_t kStates = 128;  // 6 sphere bits x context bit

  // State index: (mask << 1) | cf.
  static std::size_t next(std::size_t s, std::size_t g) {
    const std::uint32_t mask = static_cast<std::uint32_t>(s >> 1);
    if (!chain_achievable(g, mask)) return s;
    return ((mask | (1u << g)) << 1) | (s & 1u);
  }

  static double reward(std::size_t s, std::size_t g) {
    const std::uint32_t mask = static_cast<std::uint32_t>(s >> 1);
    const bool chain_end = g == 0 || g == 4;  // a, e
    return chain_end && chain_achievable(g, mask) ? 1.0 : 0.0;
  }
};

// Bellman optimality iteration on the chain MDP until the update is below tol.
inline std::vector<std::array<double, 6>> value_iteration(double gamma, double tol = 1e-14) {
  std::vector<std::array<double, 6>> q(ChainMdp::kStates, std::array<double, 6>{});
  for (int it = 0; it < 100000; ++it) {
    double change = 0.0;
    auto prev = q;
    for (std::size_t s = 0; s < ChainMdp::kStates; ++s)
      for (std::size_t g = 0; g < 6; ++g) {
        const auto& row = prev[ChainMdp::next(s, g)];
        const double target = ChainMdp::reward(s, g) + gamma * *std::max_element(row.begin(), row.end());
        change = std::max(change, std::abs(target - q[s][g]));
        q[s][g] = target;
      }
    if (change < tol) break;
  }
  return q;
}

}  // namespace oracle
