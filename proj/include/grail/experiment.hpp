#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "grail/core.hpp"
#include "grail/motivation.hpp"
#include "grail/selection.hpp"
#include "grail/skills.hpp"
#include "grail/world.hpp"

namespace grail {

enum class System : std::uint8_t { grail, c_grail, m_grail };
enum class Backend : std::uint8_t { idealized, actor_critic };

inline const char* to_string(System s) {
  switch (s) {
    case System::grail: return "grail";
    case System::c_grail: return "c_grail";
    case System::m_grail: return "m_grail";
  }
  return "?";
}

inline const char* to_string(Backend b) { return b == Backend::idealized ? "idealized" : "actor_critic"; }

inline constexpr const char* kValidSystems = "grail, c_grail, m_grail";
inline constexpr const char* kValidBackends = "idealized, actor_critic";

inline System parse_system(const std::string& s) {
  if (s == "grail") return System::grail;
  if (s == "c_grail") return System::c_grail;
  if (s == "m_grail") return System::m_grail;
  throw ConfigError("unknown system '" + s + "' (valid systems: " + kValidSystems + ")");
}

inline Backend parse_backend(const std::string& s) {
  if (s == "idealized") return Backend::idealized;
  if (s == "actor_critic") return Backend::actor_critic;
  throw ConfigError("unknown backend '" + s + "' (valid backends: " + kValidBackends + ")");
}

inline Strategy strategy_for(System s) {
  switch (s) {
    case System::grail: return Strategy::bandit;
    case System::c_grail: return Strategy::contextual;
    case System::m_grail: return Strategy::q_learning;
  }
  return Strategy::bandit;
}

struct ExperimentConfig {
  ScenarioSpec scenario = builtin_scenario(1);
  std::optional<int> scenario_id = 1;
  System system = System::grail;
  Backend backend = Backend::idealized;
  std::size_t replications = 10;
  std::uint64_t seed = 1;
  std::size_t timeout_steps = 800;
  std::size_t eval_interval = 50;
  std::size_t eval_trials = 10;  // frozen-policy probes per expert (actor-critic)
  std::size_t jobs = 1;
  bool dump_values = false;

  SelectorParams selector{};
  PredictorParams predictor{};
  ExpertSelectorParams expert_selector{};
  IdealizedParams idealized{};
  ActorCriticParams actor_critic{};

  // Unset means "follow the system": GRAIL is context-blind, ungated and uses
  // a warmer softmax than the contextual selectors.
  std::optional<ContextKeying> keying;
  std::optional<bool> gate;
  std::optional<double> temperature;

  static constexpr double kBanditTemperature = 0.01;
  static constexpr double kContextualTemperature = 0.0007;

  double effective_temperature() const {
    if (temperature) return *temperature;
    return system == System::grail ? kBanditTemperature : kContextualTemperature;
  }

  SelectorParams effective_selector() const {
    SelectorParams p = selector;
    p.temperature = effective_temperature();
    return p;
  }

  ContextKeying effective_keying() const {
    if (keying) return *keying;
    return system == System::grail ? ContextKeying::none : ContextKeying::full_state;
  }
  bool effective_gate() const { return gate.value_or(system != System::grail); }

  void validate() const {
    validate_rules(scenario);
    if (replications < 1) throw ConfigError("replications must be >= 1");
    if (timeout_steps == 0) throw ConfigError("timeout_steps must be > 0");
    if (eval_interval == 0) throw ConfigError("eval_interval must be > 0");
    if (jobs == 0) throw ConfigError("jobs must be >= 1");
    if (!(effective_temperature() > 0.0)) throw ConfigError("selector temperature must be > 0");
    if (!(expert_selector.temperature > 0.0)) throw ConfigError("expert selector temperature must be > 0");
  }
};

struct TrialRecord {
  std::size_t trial = 0;
  std::size_t epoch = 0;
  WorldState state;        // at selection
  ContextKey state_key = 0;  // full-state key, independent of the system's keying
  GoalId goal;
  Side arm = Side::left;
  bool achievable = false;
  bool achieved = false;
  std::optional<GoalId> touched;
  bool gate = true;
  double reward = 0.0;
  std::size_t steps = 0;
};

struct CompetencePoint {
  std::size_t trial_index = 0;  // trials completed
  std::vector<double> competence;
  std::vector<double> training_success;  // EMA of achieved over selections
};

struct WastedPoint {
  std::size_t interval_end = 0;
  std::size_t cumulative_wasted = 0;
};

struct ReplicationResult {
  std::size_t replication = 0;
  std::vector<TrialRecord> records;
  std::vector<CompetencePoint> competence;
  std::vector<WastedPoint> wasted;
  std::string predictor_csv;
  std::string values_csv;
  std::string experts_snapshot;
};

inline std::size_t count_wasted(const std::vector<TrialRecord>& records, std::size_t begin, std::size_t end) {
  std::size_t n = 0;
  for (const auto& r : records)
    if (r.trial >= begin && r.trial < end && !r.achievable) ++n;
  return n;
}

/// One replication of one system: world, goal selector, predictor, expert
/// selector and two experts per goal.
template <ExpertBackend Expert>
class Simulation {
 public:
  Simulation(const ExperimentConfig& cfg, std::size_t replication)
      : cfg_(cfg),
        spec_(cfg.scenario),
        replication_(replication),
        rng_(make_seed(cfg.seed, replication, 0)),
        eval_rng_(make_seed(cfg.seed, replication, 1)),
        selector_(strategy_for(cfg.system), spec_.num_goals(), cfg.effective_keying(), cfg.effective_selector()),
        predictor_(spec_.num_goals(), cfg.effective_keying(), cfg.predictor),
        expert_selector_(spec_.num_goals(), cfg.expert_selector),
        success_ema_(spec_.num_goals(), 0.0) {
    Rng init(make_seed(cfg.seed, replication, 2));
    experts_.reserve(2 * spec_.num_goals());
    for (std::size_t i = 0; i < 2 * spec_.num_goals(); ++i) experts_.emplace_back(params(cfg), init);
    world_ = all_off(spec_);
  }

  const ScenarioSpec& scenario() const { return spec_; }
  const WorldState& world() const { return world_; }
  WorldState& world() { return world_; }
  std::size_t trials_done() const { return trial_; }
  const GoalSelector& selector() const { return selector_; }
  const AchievementPredictor& predictor() const { return predictor_; }
  AchievementPredictor& predictor() { return predictor_; }
  const ExpertSelector& expert_selector() const { return expert_selector_; }
  const Expert& expert(ExpertId id) const { return experts_.at(index(id)); }
  Expert& expert(ExpertId id) { return experts_.at(index(id)); }

  // Resets the world if the schedule says this trial starts fresh.
  void prepare_trial() {
    if (resets_before(spec_, trial_)) world_ = reset(spec_, rng_);
  }

  TrialRecord run_trial() {
    prepare_trial();
    TrialRecord rec;
    rec.trial = trial_;
    rec.epoch = trial_ / spec_.trials_per_epoch;
    rec.state = world_;
    rec.state_key = context_key(world_, ContextKeying::full_state);

    const ContextKey key = selector_.key(world_);
    rec.goal = selector_.select(world_, rng_);
    rec.achievable = is_achievable(spec_, rec.goal, world_);
    const ExpertId eid = expert_selector_.select(rec.goal, rng_);
    rec.arm = eid.arm;

    AttemptContext ctx{&spec_, rec.goal, eid.arm, rec.achievable, cfg_.timeout_steps};
    Attempt attempt = expert(eid).attempt(ctx, rng_);
    rec.steps = attempt.steps;
    rec.touched = attempt.touched;

    WorldState next = world_;
    if (attempt.touched) {
      auto res = apply_touch(spec_, *attempt.touched, world_);
      next = res.state;
      rec.achieved = res.achieved && *attempt.touched == rec.goal;
    }

    rec.gate = cfg_.effective_gate() ? predictor_.learning_gate(rec.goal, world_, rec.achieved) : true;
    rec.reward = predictor_.update_and_reward(rec.goal, world_, rec.achieved);
    require_finite(rec.reward, "intrinsic reward");

    expert(eid).learn(attempt, rec.achieved ? 1.0 : 0.0, rec.gate);
    if (rec.gate) expert_selector_.update(eid, rec.achieved);

    double& ema = success_ema_[rec.goal.index];
    ema += kSuccessSmoothing * ((rec.achieved ? 1.0 : 0.0) - ema);

    const bool terminal = ends_epoch(spec_, trial_);
    selector_.update(key, rec.goal, rec.reward, selector_.key(next), terminal);

    world_ = std::move(next);
    ++trial_;
    return rec;
  }

  /// Best frozen-policy success rate over the goal's two experts. Never
  /// updates any learner; draws only from the evaluation stream.
  double measure_competence(GoalId goal) {
    double best = 0.0;
    for (Side side : {Side::left, Side::right}) {
      AttemptContext ctx{&spec_, goal, side, true, cfg_.timeout_steps};
      const double c = expert({goal, side}).evaluate(ctx, eval_rng_, cfg_.eval_trials);
      require_finite(c, "competence");
      best = std::max(best, c);
    }
    return best;
  }

  CompetencePoint snapshot_competence() {
    CompetencePoint p;
    p.trial_index = trial_;
    for (std::size_t g = 0; g < spec_.num_goals(); ++g) p.competence.push_back(measure_competence(GoalId{g}));
    p.training_success = success_ema_;
    return p;
  }

  std::string experts_snapshot() const {
    std::ostringstream os;
    for (std::size_t g = 0; g < spec_.num_goals(); ++g)
      for (Side side : {Side::left, Side::right}) {
        os << "expert " << spec_.goals[g].label << ' ' << to_string(side) << '\n';
        expert({GoalId{g}, side}).save(os);
      }
    return os.str();
  }

  ReplicationResult run() {
    ReplicationResult out;
    out.replication = replication_;
    out.records.reserve(spec_.total_trials);
    std::ostringstream values;
    out.competence.push_back(snapshot_competence());
    std::size_t wasted = 0;
    while (trial_ < spec_.total_trials) {
      auto rec = run_trial();
      if (!rec.achievable) ++wasted;
      out.records.push_back(std::move(rec));
      if (trial_ % cfg_.eval_interval == 0 || trial_ == spec_.total_trials) {
        out.competence.push_back(snapshot_competence());
        out.wasted.push_back({trial_, wasted});
        if (cfg_.dump_values) selector_.write_csv(values, replication_, trial_);
      }
    }
    std::ostringstream pred;
    predictor_.write_csv(pred);
    out.predictor_csv = pred.str();
    out.values_csv = values.str();
    out.experts_snapshot = experts_snapshot();
    return out;
  }

  static std::uint64_t make_seed(std::uint64_t base, std::size_t replication, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                      static_cast<std::uint32_t>(replication), static_cast<std::uint32_t>(stream)};
    std::array<std::uint32_t, 2> words{};
    seq.generate(words.begin(), words.end());
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
  }

 private:
  static constexpr double kSuccessSmoothing = 0.1;

  static typename Expert::Params params(const ExperimentConfig& cfg) {
    if constexpr (std::is_same_v<Expert, IdealizedExpert>)
      return cfg.idealized;
    else
      return cfg.actor_critic;
  }

  static std::size_t index(ExpertId id) { return 2 * id.goal.index + static_cast<std::size_t>(id.arm); }

  const ExperimentConfig& cfg_;
  const ScenarioSpec& spec_;
  std::size_t replication_;
  Rng rng_;
  Rng eval_rng_;
  GoalSelector selector_;
  AchievementPredictor predictor_;
  ExpertSelector expert_selector_;
  std::vector<Expert> experts_;
  std::vector<double> success_ema_;
  WorldState world_;
  std::size_t trial_ = 0;
};

// ---------------------------------------------------------------------------
// Aggregation

struct MeanCi {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

inline MeanCi mean_ci(const std::vector<double>& xs) {
  MeanCi m;
  if (xs.empty()) return m;
  const double n = static_cast<double>(xs.size());
  for (double x : xs) m.mean += x;
  m.mean /= n;
  double se = 0.0;
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    se = std::sqrt(ss / (n - 1.0) / n);
  }
  m.lo = m.mean - 1.96 * se;
  m.hi = m.mean + 1.96 * se;
  return m;
}

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<ReplicationResult> replications;

  // Final measured competence per replication and goal.
  std::vector<std::vector<double>> final_competence() const {
    std::vector<std::vector<double>> out;
    for (const auto& r : replications) out.push_back(r.competence.back().competence);
    return out;
  }
};

template <ExpertBackend Expert>
ExperimentResult run_experiment_with(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult result{cfg, std::vector<ReplicationResult>(cfg.replications)};
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t r = next++; r < cfg.replications; r = next++) {
      try {
        Simulation<Expert> sim(result.config, r);
        result.replications[r] = sim.run();
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t jobs = std::min(cfg.jobs, cfg.replications);
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return result;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  return cfg.backend == Backend::idealized ? run_experiment_with<IdealizedExpert>(cfg)
                                           : run_experiment_with<ActorCriticExpert>(cfg);
}

// ---------------------------------------------------------------------------
// CSV output

namespace csv {

inline void set_format(std::ostream& os) { os << std::setprecision(10); }

inline void trials(std::ostream& os, const ExperimentResult& res) {
  set_format(os);
  os << "replication,trial,epoch,state_key,goal,achievable,achieved,reward,steps\n";
  for (const auto& rep : res.replications)
    for (const auto& r : rep.records)
      os << rep.replication << ',' << r.trial << ',' << r.epoch << ',' << r.state_key << ','
         << res.config.scenario.label(r.goal) << ',' << int(r.achievable) << ',' << int(r.achieved) << ','
         << r.reward << ',' << r.steps << '\n';
}

inline void competence(std::ostream& os, const ExperimentResult& res) {
  set_format(os);
  os << "replication,trial_index,goal,competence\n";
  for (const auto& rep : res.replications)
    for (const auto& p : rep.competence)
      for (std::size_t g = 0; g < p.competence.size(); ++g)
        os << rep.replication << ',' << p.trial_index << ',' << res.config.scenario.goals[g].label << ','
           << p.competence[g] << '\n';
}

inline void training_success(std::ostream& os, const ExperimentResult& res) {
  set_format(os);
  os << "replication,trial_index,goal,success_ema\n";
  for (const auto& rep : res.replications)
    for (const auto& p : rep.competence)
      for (std::size_t g = 0; g < p.training_success.size(); ++g)
        os << rep.replication << ',' << p.trial_index << ',' << res.config.scenario.goals[g].label << ','
           << p.training_success[g] << '\n';
}

inline void wasted(std::ostream& os, const ExperimentResult& res) {
  set_format(os);
  os << "replication,interval_end,cumulative_wasted\n";
  for (const auto& rep : res.replications)
    for (const auto& w : rep.wasted) os << rep.replication << ',' << w.interval_end << ',' << w.cumulative_wasted << '\n';
}

inline void competence_agg(std::ostream& os, const ExperimentResult& res) {
  set_format(os);
  os << "trial_index,goal,mean,ci_low,ci_high\n";
  if (res.replications.empty()) return;
  const auto& first = res.replications.front().competence;
  for (std::size_t i = 0; i < first.size(); ++i)
    for (std::size_t g = 0; g < first[i].competence.size(); ++g) {
      std::vector<double> xs;
      for (const auto& rep : res.replications) xs.push_back(rep.competence.at(i).competence[g]);
      const auto m = mean_ci(xs);
      os << first[i].trial_index << ',' << res.config.scenario.goals[g].label << ',' << m.mean << ',' << m.lo << ','
         << m.hi << '\n';
    }
}

inline void wasted_agg(std::ostream& os, const ExperimentResult& res) {
  set_format(os);
  os << "interval_end,mean,ci_low,ci_high\n";
  if (res.replications.empty()) return;
  const auto& first = res.replications.front().wasted;
  for (std::size_t i = 0; i < first.size(); ++i) {
    std::vector<double> xs;
    for (const auto& rep : res.replications) xs.push_back(static_cast<double>(rep.wasted.at(i).cumulative_wasted));
    const auto m = mean_ci(xs);
    os << first[i].interval_end << ',' << m.mean << ',' << m.lo << ',' << m.hi << '\n';
  }
}

}  // namespace csv

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << content;
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

template <class Fn>
std::string render(Fn&& fn, const ExperimentResult& res) {
  std::ostringstream os;
  fn(os, res);
  return os.str();
}

/// Writes the full CSV set (plus predictor tables and expert snapshots) into dir.
inline void write_outputs(const ExperimentResult& res, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
  write_file(dir / "trials.csv", render(csv::trials, res));
  write_file(dir / "competence.csv", render(csv::competence, res));
  write_file(dir / "training_success.csv", render(csv::training_success, res));
  write_file(dir / "wasted.csv", render(csv::wasted, res));
  write_file(dir / "competence_agg.csv", render(csv::competence_agg, res));
  write_file(dir / "wasted_agg.csv", render(csv::wasted_agg, res));
  std::string pred = "replication,goal,context_key,P\n";
  std::string values = "replication,trial_index,state_key,goal,value\n";
  std::string experts;
  for (const auto& rep : res.replications) {
    std::istringstream is(rep.predictor_csv);
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) pred += std::to_string(rep.replication) + "," + line + "\n";
    values += rep.values_csv;
    experts += "replication " + std::to_string(rep.replication) + "\n" + rep.experts_snapshot;
  }
  write_file(dir / "predictor.csv", pred);
  if (res.config.dump_values) write_file(dir / "values.csv", values);
  write_file(dir / "experts.txt", experts);
}

}  // namespace grail
