#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "grail/arm.hpp"
#include "grail/core.hpp"
#include "grail/selection.hpp"
#include "grail/world.hpp"

namespace grail {

struct ExpertId {
  GoalId goal;
  Side arm = Side::left;

  friend bool operator==(ExpertId, ExpertId) = default;
};

// Everything an expert needs to attempt one goal for one trial.
struct AttemptContext {
  const ScenarioSpec* scenario = nullptr;
  GoalId goal;
  Side arm = Side::left;
  bool achievable = false;  // preconditions met (idealized backend only)
  std::size_t timeout_steps = 800;
};

struct Transition {
  JointState joints;
  JointState action;  // desired angles actually sent, noise included
  JointState next;
};

struct Attempt {
  std::optional<GoalId> touched;  // first sphere the effector met
  bool reached_target = false;    // touched == selected goal
  std::size_t steps = 0;
  std::vector<Transition> trajectory;
};

// ---------------------------------------------------------------------------
// Idealized expert: a scalar competence standing in for a trained policy.

struct IdealizedParams {
  double initial_competence = 0.12;
  double learning_rate = 0.02;
  double noise = 0.0;            // std of Gaussian jitter on the per-attempt success probability
  double disruption_rate = 0.05; // loss when the arm reaches a sphere that does not light up
};

class IdealizedExpert {
 public:
  using Params = IdealizedParams;

  IdealizedExpert() = default;
  IdealizedExpert(const Params& p, Rng& /*init*/) : params_(p), competence_(std::clamp(p.initial_competence, 0.0, 1.0)) {}

  double competence() const { return competence_; }
  const Params& params() const { return params_; }
  void set_competence(double c) { competence_ = std::clamp(c, 0.0, 1.0); }

  // Whether the policy gets the hand onto the sphere this trial.
  bool reach(Rng& rng) const {
    double p = competence_;
    if (params_.noise > 0.0) p += params_.noise * std::normal_distribution<double>(0.0, 1.0)(rng);
    return std::bernoulli_distribution(std::clamp(p, 0.0, 1.0))(rng);
  }

  Attempt attempt(const AttemptContext& ctx, Rng& rng) const {
    Attempt a;
    a.reached_target = reach(rng);
    if (a.reached_target) a.touched = ctx.goal;
    return a;
  }

  void learn(const Attempt& attempt, double pseudo_reward, bool gate) {
    if (!gate) return;
    if (pseudo_reward > 0.0) {
      competence_ += params_.learning_rate * (1.0 - competence_);
    } else if (attempt.reached_target) {
      competence_ -= params_.disruption_rate * competence_;
    }
    competence_ = std::clamp(competence_, 0.0, 1.0);
    require_finite(competence_, "idealized expert competence");
  }

  double evaluate(const AttemptContext&, Rng&, std::size_t /*trials*/) const { return competence_; }

  void save(std::ostream& os) const {
    os.precision(17);
    os << "idealized " << competence_ << ' ' << params_.initial_competence << ' ' << params_.learning_rate << ' '
       << params_.noise << ' ' << params_.disruption_rate << '\n';
  }

  void load(std::istream& is) {
    std::string tag;
    is >> tag >> competence_ >> params_.initial_competence >> params_.learning_rate >> params_.noise >>
        params_.disruption_rate;
    if (!is || tag != "idealized") throw ConfigError("malformed idealized expert snapshot");
  }

  friend bool operator==(const IdealizedExpert& a, const IdealizedExpert& b) {
    return a.competence_ == b.competence_;
  }

 private:
  Params params_{};
  double competence_ = 0.12;
};

/// Idealized attempt outcome: never succeeds without preconditions, otherwise
/// Bernoulli(competence).
inline bool idealized_attempt(const IdealizedExpert& expert, bool achievable, Rng& rng) {
  const bool reached = expert.reach(rng);
  return achievable && reached;
}

// ---------------------------------------------------------------------------
// Actor-critic expert for continuous joint space.

struct ActorCriticParams {
  int hidden = 20;
  double actor_lr = 0.02;
  double critic_lr = 0.02;
  double discount = 0.99;
  double noise_initial = 0.6;   // stationary std of the exploration process, rad
  double noise_min = 0.05;
  double noise_decay = 0.999;   // per gated learning update
  double noise_correlation = 0.9;
  double init_scale = 0.1;
  double start_jitter = 0.1;    // rad, uniform around the rest pose
};

/// Two one-hidden-layer tanh networks: the actor maps joint angles to desired
/// joint angles, the critic maps them to a state value. Exploration is a
/// temporally correlated Gaussian process added to the actor's output.
/// Learning replays the trial backwards with TD(0); the actor moves towards the
/// executed action whenever the TD error is positive.
class ActorCriticExpert {
 public:
  using Params = ActorCriticParams;
  using Vec = Eigen::VectorXd;
  using Mat = Eigen::MatrixXd;

  ActorCriticExpert() = default;

  ActorCriticExpert(const Params& p, Rng& rng) : params_(p), noise_scale_(p.noise_initial) {
    if (p.hidden <= 0) throw ConfigError("actor_critic.hidden must be positive");
    std::normal_distribution<double> n(0.0, p.init_scale);
    auto fill = [&](Mat& m, int r, int c) {
      m.resize(r, c);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = n(rng);
    };
    auto fillv = [&](Vec& v, int r) {
      v.resize(r);
      for (int i = 0; i < r; ++i) v(i) = n(rng);
    };
    const int in = static_cast<int>(kArmJoints) + 1;  // angles + bias
    fill(actor_w1_, p.hidden, in);
    fill(actor_w2_, static_cast<int>(kArmJoints), p.hidden + 1);
    fill(critic_w1_, p.hidden, in);
    fillv(critic_w2_, p.hidden + 1);
    // Actor starts out holding the rest pose.
    const JointState rest = rest_pose();
    for (std::size_t i = 0; i < kArmJoints; ++i)
      actor_w2_(static_cast<int>(i), p.hidden) = std::atanh(std::clamp(rest.angles[i] / kAngleScale, -0.99, 0.99));
  }

  const Params& params() const { return params_; }
  double noise_scale() const { return noise_scale_; }

  /// Deterministic mean action for the given joint state.
  JointState mean_action(const JointState& joints, const ArmConfig& cfg) const {
    const Vec h = hidden(actor_w1_, joints);
    const Vec out = (actor_w2_ * h).array().tanh();
    JointState a;
    for (std::size_t i = 0; i < kArmJoints; ++i) a.angles[i] = kAngleScale * out(static_cast<int>(i));
    return clamp_to_limits(a, cfg);
  }

  /// Mean action plus exploration noise; noise is zero in evaluation mode.
  JointState act(const JointState& joints, const ArmConfig& cfg, const std::array<double, kArmJoints>& noise) const {
    JointState a = mean_action(joints, cfg);
    for (std::size_t i = 0; i < kArmJoints; ++i) a.angles[i] += noise[i];
    return clamp_to_limits(a, cfg);
  }

  double value(const JointState& joints) const {
    const Vec h = hidden(critic_w1_, joints);
    return critic_w2_.dot(h);
  }

  Attempt attempt(const AttemptContext& ctx, Rng& rng) const { return rollout(ctx, rng, noise_scale_, true); }

  /// Success rate over `trials` noise-free rollouts aimed at ctx.goal, ignoring preconditions.
  double evaluate(const AttemptContext& ctx, Rng& rng, std::size_t trials) const {
    std::size_t wins = 0;
    for (std::size_t k = 0; k < trials; ++k)
      if (rollout(ctx, rng, 0.0, false).reached_target) ++wins;
    return trials == 0 ? 0.0 : static_cast<double>(wins) / static_cast<double>(trials);
  }

  void learn(const Attempt& attempt, double pseudo_reward, bool gate) {
    if (!gate || attempt.trajectory.empty()) return;
    const auto& traj = attempt.trajectory;
    const bool terminal = attempt.touched.has_value();
    const double lr_c = params_.critic_lr;
    const double lr_a = params_.actor_lr;
    for (std::size_t t = traj.size(); t-- > 0;) {
      const Transition& tr = traj[t];
      const bool last = t + 1 == traj.size();
      const double r = last ? pseudo_reward : 0.0;
      const double next_v = (last && terminal) ? 0.0 : value(tr.next);

      const Vec hc = hidden(critic_w1_, tr.joints);
      const double v = critic_w2_.dot(hc);
      const double delta = r + params_.discount * next_v - v;
      require_finite(delta, "actor-critic TD error");

      // Critic gradient step on 0.5 * delta^2.
      const int H = params_.hidden;
      Vec dh = critic_w2_.head(H).cwiseProduct((1.0 - hc.head(H).array().square()).matrix());
      critic_w2_ += lr_c * delta * hc;
      critic_w1_ += lr_c * delta * dh * input(tr.joints).transpose();

      if (delta > 0.0) {
        const Vec ha = hidden(actor_w1_, tr.joints);
        const Vec out = (actor_w2_ * ha).array().tanh();
        Vec err(static_cast<int>(kArmJoints));
        for (std::size_t i = 0; i < kArmJoints; ++i)
          err(static_cast<int>(i)) = tr.action.angles[i] / kAngleScale - out(static_cast<int>(i));
        const Vec dout = err.cwiseProduct((1.0 - out.array().square()).matrix());
        const Vec back = actor_w2_.leftCols(H).transpose() * dout;
        const Vec dha = back.cwiseProduct((1.0 - ha.head(H).array().square()).matrix());
        actor_w2_ += lr_a * dout * ha.transpose();
        actor_w1_ += lr_a * dha * input(tr.joints).transpose();
      }
    }
    noise_scale_ = std::max(params_.noise_min, noise_scale_ * params_.noise_decay);
    check_finite();
  }

  void save(std::ostream& os) const {
    os.precision(17);
    os << "actor_critic " << params_.hidden << ' ' << noise_scale_ << '\n';
    auto dump = [&](const auto& m) {
      for (Eigen::Index i = 0; i < m.size(); ++i) os << m.data()[i] << (i + 1 == m.size() ? '\n' : ' ');
    };
    dump(actor_w1_);
    dump(actor_w2_);
    dump(critic_w1_);
    dump(critic_w2_);
  }

  void load(std::istream& is) {
    std::string tag;
    int hidden = 0;
    is >> tag >> hidden >> noise_scale_;
    if (!is || tag != "actor_critic" || hidden <= 0) throw ConfigError("malformed actor-critic snapshot");
    params_.hidden = hidden;
    const int in = static_cast<int>(kArmJoints) + 1;
    actor_w1_.resize(hidden, in);
    actor_w2_.resize(static_cast<int>(kArmJoints), hidden + 1);
    critic_w1_.resize(hidden, in);
    critic_w2_.resize(hidden + 1);
    auto read = [&](auto& m) {
      for (Eigen::Index i = 0; i < m.size(); ++i) is >> m.data()[i];
    };
    read(actor_w1_);
    read(actor_w2_);
    read(critic_w1_);
    read(critic_w2_);
    if (!is) throw ConfigError("truncated actor-critic snapshot");
  }

  friend bool operator==(const ActorCriticExpert& a, const ActorCriticExpert& b) {
    return a.noise_scale_ == b.noise_scale_ && a.actor_w1_ == b.actor_w1_ && a.actor_w2_ == b.actor_w2_ &&
           a.critic_w1_ == b.critic_w1_ && a.critic_w2_ == b.critic_w2_;
  }

 private:
  static constexpr double kAngleScale = std::numbers::pi;

  static Vec input(const JointState& j) {
    Vec x(static_cast<int>(kArmJoints) + 1);
    for (std::size_t i = 0; i < kArmJoints; ++i) x(static_cast<int>(i)) = j.angles[i] / kAngleScale;
    x(static_cast<int>(kArmJoints)) = 1.0;
    return x;
  }

  // Hidden activations with a trailing bias unit.
  static Vec hidden(const Mat& w1, const JointState& j) {
    const Vec pre = w1 * input(j);
    Vec h(pre.size() + 1);
    h.head(pre.size()) = pre.array().tanh();
    h(pre.size()) = 1.0;
    return h;
  }

  Attempt rollout(const AttemptContext& ctx, Rng& rng, double noise_std, bool record) const {
    const ScenarioSpec& sc = *ctx.scenario;
    const ArmConfig& cfg = sc.arm;
    const ArmPlacement place = default_placement(ctx.arm);

    JointState joints = rest_pose();
    std::uniform_real_distribution<double> jitter(-params_.start_jitter, params_.start_jitter);
    for (double& q : joints.angles) q += jitter(rng);
    joints = clamp_to_limits(joints, cfg);

    const double rho = params_.noise_correlation;
    const double innovation = noise_std * std::sqrt(1.0 - rho * rho);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::array<double, kArmJoints> noise{};
    if (noise_std > 0.0)
      for (double& n : noise) n = noise_std * gauss(rng);

    Attempt out;
    if (record) out.trajectory.reserve(std::min<std::size_t>(ctx.timeout_steps, 256));
    for (std::size_t step = 0; step < ctx.timeout_steps; ++step) {
      const JointState action = act(joints, cfg, noise);
      const JointState next = step_toward(joints, action, cfg);
      if (record) out.trajectory.push_back({joints, action, next});
      joints = next;
      out.steps = step + 1;
      const Point2 eff = place.effector(joints, cfg);
      for (std::size_t g = 0; g < sc.goals.size(); ++g) {
        if (check_touch(eff, sc.goals[g].position, cfg)) {
          out.touched = GoalId{g};
          out.reached_target = g == ctx.goal.index;
          return out;
        }
      }
      if (noise_std > 0.0)
        for (double& n : noise) n = rho * n + innovation * gauss(rng);
    }
    return out;
  }

  void check_finite() const {
    if (!actor_w1_.allFinite() || !actor_w2_.allFinite() || !critic_w1_.allFinite() || !critic_w2_.allFinite())
      throw NumericError("actor-critic parameters became non-finite");
  }

  Params params_{};
  double noise_scale_ = 0.0;
  Mat actor_w1_, actor_w2_, critic_w1_;
  Vec critic_w2_;
};

template <class E>
concept ExpertBackend = requires(E e, const E ce, const AttemptContext& ctx, Rng& rng, const Attempt& a,
                                 std::ostream& os, std::istream& is) {
  typename E::Params;
  { ce.attempt(ctx, rng) } -> std::same_as<Attempt>;
  e.learn(a, 1.0, true);
  { ce.evaluate(ctx, rng, std::size_t{10}) } -> std::convertible_to<double>;
  ce.save(os);
  e.load(is);
};

static_assert(ExpertBackend<IdealizedExpert>);
static_assert(ExpertBackend<ActorCriticExpert>);

// ---------------------------------------------------------------------------

struct ExpertSelectorParams {
  double temperature = 0.1;
  double smoothing = 0.1;
};

/// Chooses which arm trains a goal: softmax over per-expert success EMAs.
class ExpertSelector {
 public:
  ExpertSelector(std::size_t num_goals, ExpertSelectorParams p = {})
      : params_(p), ema_(num_goals, {0.0, 0.0}) {}

  std::array<double, 2> probabilities(GoalId goal) const {
    const auto& e = ema_.at(goal.index);
    const auto p = SoftmaxRule{params_.temperature}.probabilities(std::span<const double>(e.data(), e.size()));
    return {p[0], p[1]};
  }

  ExpertId select(GoalId goal, Rng& rng) const {
    const auto& e = ema_.at(goal.index);
    const std::size_t i = SoftmaxRule{params_.temperature}.sample(std::span<const double>(e.data(), e.size()), rng);
    return {goal, i == 0 ? Side::left : Side::right};
  }

  void update(ExpertId id, bool achieved) {
    double& v = ema_.at(id.goal.index)[static_cast<std::size_t>(id.arm)];
    v += params_.smoothing * ((achieved ? 1.0 : 0.0) - v);
  }

  double ema(ExpertId id) const { return ema_.at(id.goal.index)[static_cast<std::size_t>(id.arm)]; }
  void set_ema(ExpertId id, double v) { ema_.at(id.goal.index)[static_cast<std::size_t>(id.arm)] = std::clamp(v, 0.0, 1.0); }

 private:
  ExpertSelectorParams params_;
  std::vector<std::array<double, 2>> ema_;
};

}  // namespace grail
