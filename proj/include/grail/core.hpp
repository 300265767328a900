#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace grail {

using Rng = std::mt19937_64;

// Raised for malformed scenarios, configs and unknown goals.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a learner or metric produces NaN/Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GoalId {
  std::size_t index = 0;

  friend bool operator==(GoalId, GoalId) = default;
  friend auto operator<=>(GoalId, GoalId) = default;
};

enum class Side : std::uint8_t { left = 0, right = 1 };

inline const char* to_string(Side s) { return s == Side::left ? "left" : "right"; }

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

inline void require_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw NumericError("non-finite value in " + what);
}

}  // namespace grail
