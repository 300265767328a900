#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>

#include "grail/core.hpp"

namespace grail {

inline constexpr std::size_t kArmJoints = 4;

struct JointLimit {
  double min = -std::numbers::pi;
  double max = std::numbers::pi;
};

struct ArmConfig {
  std::array<double, kArmJoints> link_lengths{0.25, 0.25, 0.25, 0.25};
  std::array<JointLimit, kArmJoints> joint_limits{};
  double max_step = 0.05;      // rad per timestep
  double touch_radius = 0.05;

  double reach() const {
    double r = 0.0;
    for (double l : link_lengths) r += l;
    return r;
  }

  void validate() const {
    for (double l : link_lengths)
      if (!(l > 0.0)) throw ConfigError("arm link lengths must be positive");
    for (auto lim : joint_limits)
      if (!(lim.min <= lim.max)) throw ConfigError("arm joint limits must be ordered (min <= max)");
    if (!(max_step > 0.0)) throw ConfigError("arm max_step must be > 0");
    if (!(touch_radius > 0.0)) throw ConfigError("arm touch_radius must be > 0");
  }
};

struct JointState {
  std::array<double, kArmJoints> angles{};

  friend bool operator==(const JointState&, const JointState&) = default;
};

inline JointState clamp_to_limits(JointState j, const ArmConfig& cfg) {
  for (std::size_t i = 0; i < kArmJoints; ++i)
    j.angles[i] = std::clamp(j.angles[i], cfg.joint_limits[i].min, cfg.joint_limits[i].max);
  return j;
}

// End effector of a planar serial chain rooted at the origin, angles relative.
inline Point2 forward_kinematics(const JointState& joints, const ArmConfig& cfg) {
  Point2 p;
  double heading = 0.0;
  for (std::size_t i = 0; i < kArmJoints; ++i) {
    heading += joints.angles[i];
    p.x += cfg.link_lengths[i] * std::cos(heading);
    p.y += cfg.link_lengths[i] * std::sin(heading);
  }
  return p;
}

// Position control: each joint moves at most max_step toward its desired angle,
// and never leaves its limits.
inline JointState step_toward(const JointState& joints, const JointState& desired, const ArmConfig& cfg) {
  JointState next = joints;
  for (std::size_t i = 0; i < kArmJoints; ++i) {
    const auto lim = cfg.joint_limits[i];
    const double target = std::clamp(desired.angles[i], lim.min, lim.max);
    const double diff = target - joints.angles[i];
    const double step = std::clamp(diff, -cfg.max_step, cfg.max_step);
    next.angles[i] = std::clamp(joints.angles[i] + step, lim.min, lim.max);
  }
  return next;
}

inline bool check_touch(Point2 effector, Point2 sphere, const ArmConfig& cfg) {
  return distance(effector, sphere) <= cfg.touch_radius;
}

// Where an arm is mounted. The right arm is the mirror image (x -> -x) of the
// left one so both share the same joint conventions.
struct ArmPlacement {
  Point2 base{};
  bool mirrored = false;

  Point2 effector(const JointState& joints, const ArmConfig& cfg) const {
    Point2 p = forward_kinematics(joints, cfg);
    if (mirrored) p.x = -p.x;
    return {base.x + p.x, base.y + p.y};
  }
};

inline ArmPlacement default_placement(Side side) {
  return side == Side::left ? ArmPlacement{{-0.15, 0.0}, false} : ArmPlacement{{0.15, 0.0}, true};
}

// Arms start every trial pointing straight up.
inline JointState rest_pose() { return JointState{{std::numbers::pi / 2, 0.0, 0.0, 0.0}}; }

// Sampled inverse-kinematics search: random restarts followed by coordinate
// descent on end-effector distance. Returns true if some joint state within
// limits puts the effector within touch_radius of the target.
inline bool is_reachable(Point2 target, const ArmPlacement& place, const ArmConfig& cfg,
                         std::uint64_t seed = 7, int restarts = 64) {
  const double d_base = distance(target, place.base);
  if (d_base > cfg.reach() + cfg.touch_radius) return false;

  Rng rng(seed);
  for (int r = 0; r < restarts; ++r) {
    JointState j;
    for (std::size_t i = 0; i < kArmJoints; ++i) {
      std::uniform_real_distribution<double> u(cfg.joint_limits[i].min, cfg.joint_limits[i].max);
      j.angles[i] = u(rng);
    }
    double best = distance(place.effector(j, cfg), target);
    double step = 0.5;
    while (step > 1e-4 && best > cfg.touch_radius) {
      bool improved = false;
      for (std::size_t i = 0; i < kArmJoints; ++i) {
        for (double sgn : {1.0, -1.0}) {
          JointState trial = j;
          trial.angles[i] = std::clamp(j.angles[i] + sgn * step, cfg.joint_limits[i].min,
                                       cfg.joint_limits[i].max);
          const double d = distance(place.effector(trial, cfg), target);
          if (d < best) {
            best = d;
            j = trial;
            improved = true;
          }
        }
      }
      if (!improved) step *= 0.5;
    }
    if (best <= cfg.touch_radius) return true;
  }
  return false;
}

}  // namespace grail
