#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "grail/experiment.hpp"

namespace grail {

using Json = nlohmann::ordered_json;

namespace detail {

inline void reject_unknown(const Json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  std::set<std::string> ok(known.begin(), known.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

template <class T>
void read(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

inline const char* to_string(ContextKeying k) {
  switch (k) {
    case ContextKeying::none: return "none";
    case ContextKeying::context_feature: return "context_feature";
    case ContextKeying::full_state: return "full_state";
  }
  return "?";
}

inline ContextKeying parse_keying(const std::string& s) {
  if (s == "none") return ContextKeying::none;
  if (s == "context_feature") return ContextKeying::context_feature;
  if (s == "full_state") return ContextKeying::full_state;
  throw ConfigError("unknown keying '" + s + "' (valid: none, context_feature, full_state)");
}

inline RewardRule parse_reward_rule(const std::string& s) {
  if (s == "clipped") return RewardRule::clipped;
  if (s == "signed") return RewardRule::signed_;
  throw ConfigError("unknown reward_rule '" + s + "' (valid: clipped, signed)");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Scenario

inline Json scenario_to_json(const ScenarioSpec& s) {
  Json j;
  j["name"] = s.name;
  j["goals"] = Json::array();
  for (const auto& g : s.goals) j["goals"].push_back({{"label", g.label}, {"position", {g.position.x, g.position.y}}});
  j["rules"] = Json::array();
  for (const auto& r : s.rules) {
    Json jr;
    jr["goal"] = s.label(r.goal);
    jr["requires_on"] = Json::array();
    for (GoalId q : r.requires_on) jr["requires_on"].push_back(s.label(q));
    jr["blocked_by"] = Json::array();
    for (GoalId q : r.blocked_by) jr["blocked_by"].push_back(s.label(q));
    jr["requires_context"] = r.requires_context ? Json(*r.requires_context) : Json(nullptr);
    j["rules"].push_back(jr);
  }
  j["context_prob_on"] = s.context_prob_on;
  j["trials_per_epoch"] = s.trials_per_epoch;
  j["total_trials"] = s.total_trials;
  j["reset_policy"] = s.reset_policy == ResetPolicy::per_trial ? "per_trial" : "per_epoch";
  Json arm;
  arm["link_lengths"] = s.arm.link_lengths;
  arm["joint_limits"] = Json::array();
  for (auto lim : s.arm.joint_limits) arm["joint_limits"].push_back({lim.min, lim.max});
  arm["max_step"] = s.arm.max_step;
  arm["touch_radius"] = s.arm.touch_radius;
  j["arm"] = arm;
  return j;
}

/// Parses a scenario object. Goals may omit positions, in which case they are
/// laid out on the default arc; rules are keyed by goal label.
inline ScenarioSpec scenario_from_json(const Json& j) {
  detail::reject_unknown(j,
                         {"name", "goals", "rules", "context_prob_on", "trials_per_epoch", "total_trials",
                          "reset_policy", "arm"},
                         "scenario");
  ScenarioSpec s;
  detail::read(j, "name", s.name, "scenario");
  if (!j.contains("goals") || !j["goals"].is_array() || j["goals"].empty())
    throw ConfigError("scenario.goals must be a non-empty array");
  const auto arc = default_sphere_positions(j["goals"].size());
  for (std::size_t i = 0; i < j["goals"].size(); ++i) {
    const Json& g = j["goals"][i];
    Goal goal;
    goal.position = arc[i];
    if (g.is_string()) {
      goal.label = g.get<std::string>();
    } else {
      detail::reject_unknown(g, {"label", "position"}, "scenario.goals[" + std::to_string(i) + "]");
      detail::read(g, "label", goal.label, "goal");
      if (g.contains("position")) {
        const Json& p = g["position"];
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
          throw ConfigError("position of goal '" + goal.label + "' must be [x, y]");
        goal.position = {p[0].get<double>(), p[1].get<double>()};
      }
    }
    s.goals.push_back(goal);
  }
  for (std::size_t i = 0; i < s.goals.size(); ++i) s.rules.push_back({GoalId{i}, {}, {}, std::nullopt});

  if (j.contains("rules")) {
    if (!j["rules"].is_array()) throw ConfigError("scenario.rules must be an array");
    std::set<std::string> seen;
    for (const Json& jr : j["rules"]) {
      detail::reject_unknown(jr, {"goal", "requires_on", "blocked_by", "requires_context"}, "scenario.rules");
      std::string label;
      detail::read(jr, "goal", label, "rule");
      if (!seen.insert(label).second) throw ConfigError("more than one rule for goal '" + label + "'");
      DependencyRule& r = s.rules.at(s.goal_by_label(label).index);
      std::vector<std::string> req, blk;
      detail::read(jr, "requires_on", req, "rule " + label);
      detail::read(jr, "blocked_by", blk, "rule " + label);
      for (const auto& q : req) r.requires_on.push_back(s.goal_by_label(q));
      for (const auto& q : blk) r.blocked_by.push_back(s.goal_by_label(q));
      if (jr.contains("requires_context") && !jr["requires_context"].is_null()) {
        double c = 0.0;
        detail::read(jr, "requires_context", c, "rule " + label);
        r.requires_context = c;
      }
    }
  }
  detail::read(j, "context_prob_on", s.context_prob_on, "scenario");
  detail::read(j, "trials_per_epoch", s.trials_per_epoch, "scenario");
  detail::read(j, "total_trials", s.total_trials, "scenario");
  if (j.contains("reset_policy")) {
    std::string rp;
    detail::read(j, "reset_policy", rp, "scenario");
    if (rp == "per_trial")
      s.reset_policy = ResetPolicy::per_trial;
    else if (rp == "per_epoch")
      s.reset_policy = ResetPolicy::per_epoch;
    else
      throw ConfigError("unknown reset_policy '" + rp + "' (valid: per_trial, per_epoch)");
  }
  if (j.contains("arm")) {
    const Json& a = j["arm"];
    detail::reject_unknown(a, {"link_lengths", "joint_limits", "max_step", "touch_radius"}, "scenario.arm");
    detail::read(a, "link_lengths", s.arm.link_lengths, "scenario.arm");
    if (a.contains("joint_limits")) {
      std::vector<std::array<double, 2>> lims;
      detail::read(a, "joint_limits", lims, "scenario.arm");
      if (lims.size() != kArmJoints) throw ConfigError("scenario.arm.joint_limits needs one [min, max] per joint");
      for (std::size_t i = 0; i < kArmJoints; ++i) s.arm.joint_limits[i] = {lims[i][0], lims[i][1]};
    }
    detail::read(a, "max_step", s.arm.max_step, "scenario.arm");
    detail::read(a, "touch_radius", s.arm.touch_radius, "scenario.arm");
  }
  return s;
}

inline Json parse_json_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path.string());
  try {
    return Json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Experiment config

inline Json config_to_json(const ExperimentConfig& c) {
  Json j;
  if (c.scenario_id)
    j["scenario"] = *c.scenario_id;
  else
    j["scenario"] = scenario_to_json(c.scenario);
  j["system"] = to_string(c.system);
  j["backend"] = to_string(c.backend);
  j["replications"] = c.replications;
  j["seed"] = c.seed;
  j["timeout_steps"] = c.timeout_steps;
  j["eval_interval"] = c.eval_interval;
  j["eval_trials"] = c.eval_trials;
  j["jobs"] = c.jobs;
  j["dump_values"] = c.dump_values;
  j["keying"] = detail::to_string(c.effective_keying());
  j["gate"] = c.effective_gate();
  j["selector"] = {{"temperature", c.effective_temperature()},
                   {"bandit_smoothing", c.selector.bandit_smoothing},
                   {"contextual_smoothing", c.selector.contextual_smoothing},
                   {"q_learning_rate", c.selector.q_learning_rate},
                   {"q_discount", c.selector.q_discount}};
  j["predictor"] = {{"learning_rate", c.predictor.learning_rate},
                    {"gate_threshold", c.predictor.gate_threshold},
                    {"initial", c.predictor.initial},
                    {"reward_rule", c.predictor.reward_rule == RewardRule::clipped ? "clipped" : "signed"}};
  j["expert_selector"] = {{"temperature", c.expert_selector.temperature}, {"smoothing", c.expert_selector.smoothing}};
  j["idealized"] = {{"initial_competence", c.idealized.initial_competence},
                    {"learning_rate", c.idealized.learning_rate},
                    {"noise", c.idealized.noise},
                    {"disruption_rate", c.idealized.disruption_rate}};
  const auto& a = c.actor_critic;
  j["actor_critic"] = {{"hidden", a.hidden},
                       {"actor_lr", a.actor_lr},
                       {"critic_lr", a.critic_lr},
                       {"discount", a.discount},
                       {"noise_initial", a.noise_initial},
                       {"noise_min", a.noise_min},
                       {"noise_decay", a.noise_decay},
                       {"noise_correlation", a.noise_correlation},
                       {"init_scale", a.init_scale},
                       {"start_jitter", a.start_jitter}};
  return j;
}

/// Applies a config object on top of `base`. `dir` resolves relative scenario paths.
inline ExperimentConfig config_from_json(const Json& j, ExperimentConfig base = {},
                                         const std::filesystem::path& dir = {}) {
  detail::reject_unknown(j,
                         {"scenario", "system", "backend", "replications", "seed", "timeout_steps", "eval_interval",
                          "eval_trials", "jobs", "dump_values", "keying", "gate", "selector", "predictor",
                          "expert_selector", "idealized", "actor_critic"},
                         "config");
  ExperimentConfig c = std::move(base);
  if (j.contains("scenario")) {
    const Json& s = j["scenario"];
    if (s.is_number_integer()) {
      c.scenario_id = s.get<int>();
      c.scenario = builtin_scenario(*c.scenario_id);
    } else if (s.is_string()) {
      c.scenario = scenario_from_json(parse_json_file(dir / s.get<std::string>()));
      c.scenario_id.reset();
    } else {
      c.scenario = scenario_from_json(s);
      c.scenario_id.reset();
    }
  }
  if (j.contains("system")) c.system = parse_system(j["system"].get<std::string>());
  if (j.contains("backend")) c.backend = parse_backend(j["backend"].get<std::string>());
  detail::read(j, "replications", c.replications, "config");
  detail::read(j, "seed", c.seed, "config");
  detail::read(j, "timeout_steps", c.timeout_steps, "config");
  detail::read(j, "eval_interval", c.eval_interval, "config");
  detail::read(j, "eval_trials", c.eval_trials, "config");
  detail::read(j, "jobs", c.jobs, "config");
  detail::read(j, "dump_values", c.dump_values, "config");
  if (j.contains("keying") && !j["keying"].is_null()) c.keying = detail::parse_keying(j["keying"].get<std::string>());
  if (j.contains("gate") && !j["gate"].is_null()) {
    bool g = true;
    detail::read(j, "gate", g, "config");
    c.gate = g;
  }
  if (j.contains("selector")) {
    const Json& s = j["selector"];
    detail::reject_unknown(
        s, {"temperature", "bandit_smoothing", "contextual_smoothing", "q_learning_rate", "q_discount"}, "selector");
    if (s.contains("temperature") && !s["temperature"].is_null()) {
      double t = 0.0;
      detail::read(s, "temperature", t, "selector");
      c.temperature = t;
    }
    detail::read(s, "bandit_smoothing", c.selector.bandit_smoothing, "selector");
    detail::read(s, "contextual_smoothing", c.selector.contextual_smoothing, "selector");
    detail::read(s, "q_learning_rate", c.selector.q_learning_rate, "selector");
    detail::read(s, "q_discount", c.selector.q_discount, "selector");
  }
  if (j.contains("predictor")) {
    const Json& p = j["predictor"];
    detail::reject_unknown(p, {"learning_rate", "gate_threshold", "initial", "reward_rule"}, "predictor");
    detail::read(p, "learning_rate", c.predictor.learning_rate, "predictor");
    detail::read(p, "gate_threshold", c.predictor.gate_threshold, "predictor");
    detail::read(p, "initial", c.predictor.initial, "predictor");
    if (p.contains("reward_rule")) c.predictor.reward_rule = detail::parse_reward_rule(p["reward_rule"].get<std::string>());
  }
  if (j.contains("expert_selector")) {
    const Json& e = j["expert_selector"];
    detail::reject_unknown(e, {"temperature", "smoothing"}, "expert_selector");
    detail::read(e, "temperature", c.expert_selector.temperature, "expert_selector");
    detail::read(e, "smoothing", c.expert_selector.smoothing, "expert_selector");
  }
  if (j.contains("idealized")) {
    const Json& e = j["idealized"];
    detail::reject_unknown(e, {"initial_competence", "learning_rate", "noise", "disruption_rate"}, "idealized");
    detail::read(e, "initial_competence", c.idealized.initial_competence, "idealized");
    detail::read(e, "learning_rate", c.idealized.learning_rate, "idealized");
    detail::read(e, "noise", c.idealized.noise, "idealized");
    detail::read(e, "disruption_rate", c.idealized.disruption_rate, "idealized");
  }
  if (j.contains("actor_critic")) {
    const Json& e = j["actor_critic"];
    auto& a = c.actor_critic;
    detail::reject_unknown(e,
                           {"hidden", "actor_lr", "critic_lr", "discount", "noise_initial", "noise_min", "noise_decay",
                            "noise_correlation", "init_scale", "start_jitter"},
                           "actor_critic");
    detail::read(e, "hidden", a.hidden, "actor_critic");
    detail::read(e, "actor_lr", a.actor_lr, "actor_critic");
    detail::read(e, "critic_lr", a.critic_lr, "actor_critic");
    detail::read(e, "discount", a.discount, "actor_critic");
    detail::read(e, "noise_initial", a.noise_initial, "actor_critic");
    detail::read(e, "noise_min", a.noise_min, "actor_critic");
    detail::read(e, "noise_decay", a.noise_decay, "actor_critic");
    detail::read(e, "noise_correlation", a.noise_correlation, "actor_critic");
    detail::read(e, "init_scale", a.init_scale, "actor_critic");
    detail::read(e, "start_jitter", a.start_jitter, "actor_critic");
  }
  return c;
}

/// A file is either a full experiment config or a bare scenario (it has "goals").
inline ExperimentConfig load_config_file(const std::filesystem::path& path, ExperimentConfig base = {}) {
  const Json j = parse_json_file(path);
  if (j.is_object() && j.contains("goals")) {
    base.scenario = scenario_from_json(j);
    base.scenario_id.reset();
    return base;
  }
  return config_from_json(j, std::move(base), path.parent_path());
}

}  // namespace grail
