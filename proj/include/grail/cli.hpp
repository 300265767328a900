#pragma once

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "grail/config_io.hpp"
#include "grail/experiment.hpp"
#include "grail/svg_plot.hpp"

namespace grail::cli {

enum ExitCode : int { kOk = 0, kRuntimeError = 1, kConfigError = 2, kNumericError = 3 };

inline constexpr const char* kOutputEnv = "GRAIL_OUTPUT_DIR";

inline bool is_builtin_id(const std::string& s) {
  return !s.empty() && s.find_first_not_of("0123456789") == std::string::npos;
}

/// "3" selects a built-in scenario, anything else is a scenario or config file.
inline ExperimentConfig resolve_scenario(const std::string& arg, ExperimentConfig base) {
  if (is_builtin_id(arg)) {
    base.scenario_id = std::stoi(arg);
    base.scenario = builtin_scenario(*base.scenario_id);
    return base;
  }
  return load_config_file(arg, std::move(base));
}

// Dependency graph as text: requirement chains, exclusions and context conditions.
inline std::vector<std::string> describe_graph(const ScenarioSpec& s) {
  std::vector<std::string> lines;
  const std::size_t n = s.num_goals();
  std::vector<std::vector<std::size_t>> dependents(n);
  for (std::size_t i = 0; i < n; ++i)
    for (GoalId q : s.rules[i].requires_on) dependents[q.index].push_back(i);

  std::vector<std::size_t> path;
  auto walk = [&](auto&& self, std::size_t u) -> void {
    path.push_back(u);
    if (dependents[u].empty()) {
      std::string line;
      for (std::size_t k = 0; k < path.size(); ++k) line += (k ? " -> " : "") + s.goals[path[k]].label;
      lines.push_back(line);
    }
    for (std::size_t v : dependents[u]) self(self, v);
    path.pop_back();
  };
  for (std::size_t i = 0; i < n; ++i)
    if (s.rules[i].requires_on.empty() && !dependents[i].empty()) walk(walk, i);

  for (std::size_t i = 0; i < n; ++i)
    for (GoalId q : s.rules[i].blocked_by) lines.push_back(s.goals[q.index].label + " -| " + s.goals[i].label);
  for (std::size_t i = 0; i < n; ++i)
    if (s.rules[i].requires_context)
      lines.push_back(s.goals[i].label + " requires context " + std::to_string(static_cast<int>(*s.rules[i].requires_context)));
  for (std::size_t i = 0; i < n; ++i)
    if (s.rules[i].requires_on.empty() && dependents[i].empty() && s.rules[i].blocked_by.empty() &&
        !s.rules[i].requires_context)
      lines.push_back(s.goals[i].label + " (independent)");
  return lines;
}

struct RunOptions {
  std::string scenario;
  std::string config;
  std::string system;
  std::string backend;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replications;
  std::optional<std::size_t> jobs;
  std::string output;
  bool print_config = false;
  bool dump_values = false;
};

inline ExperimentConfig build_config(const RunOptions& o) {
  ExperimentConfig cfg;
  if (!o.config.empty()) cfg = load_config_file(o.config, cfg);
  if (!o.scenario.empty()) cfg = resolve_scenario(o.scenario, std::move(cfg));
  if (!o.system.empty()) cfg.system = parse_system(o.system);
  if (!o.backend.empty()) cfg.backend = parse_backend(o.backend);
  if (o.seed) cfg.seed = *o.seed;
  if (o.replications) cfg.replications = *o.replications;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (o.dump_values) cfg.dump_values = true;
  return cfg;
}

inline std::filesystem::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kOutputEnv); env && *env) return env;
  return "results";
}

inline int cmd_run(const RunOptions& o, int verbosity, std::ostream& out) {
  ExperimentConfig cfg = build_config(o);
  if (o.print_config) {
    out << config_to_json(cfg).dump(2) << '\n';
    return kOk;
  }
  cfg.validate();
  check_reachability(cfg.scenario);
  const auto dir = output_dir(o.output);
  if (verbosity > 0)
    out << "running " << to_string(cfg.system) << " on " << cfg.scenario.name << " (" << cfg.replications
        << " replications, " << to_string(cfg.backend) << " experts)\n";
  const ExperimentResult res = run_experiment(cfg);
  write_outputs(res, dir);
  write_file(dir / "config.json", config_to_json(cfg).dump(2) + "\n");
  if (verbosity > 0) {
    const auto fin = res.final_competence();
    out << "final competence (mean over replications):";
    out << std::fixed << std::setprecision(3);
    for (std::size_t g = 0; g < cfg.scenario.num_goals(); ++g) {
      std::vector<double> xs;
      for (const auto& r : fin) xs.push_back(r[g]);
      out << ' ' << cfg.scenario.goals[g].label << '=' << mean_ci(xs).mean;
    }
    out << '\n';
    if (verbosity > 1)
      for (std::size_t r = 0; r < fin.size(); ++r) {
        out << "  replication " << r << ':';
        for (std::size_t g = 0; g < fin[r].size(); ++g) out << ' ' << cfg.scenario.goals[g].label << '=' << fin[r][g];
        out << " wasted=" << res.replications[r].wasted.back().cumulative_wasted << '\n';
      }
    out << "wrote " << dir.string() << '\n';
    out.unsetf(std::ios::fixed);
  }
  return kOk;
}

struct PlotOptions {
  std::vector<std::string> inputs;
  std::string output;
};

inline std::string panel_title(const std::filesystem::path& dir) {
  std::ifstream f(dir / "config.json");
  if (f) {
    try {
      const Json j = Json::parse(f);
      if (j.contains("system")) return j["system"].get<std::string>();
    } catch (const nlohmann::json::exception&) {
    }
  }
  return dir.filename().string();
}

inline int cmd_plot(const PlotOptions& o, int verbosity, std::ostream& out) {
  std::vector<plot::Panel> panels;
  plot::Panel wasted{"cumulative wasted trials", "wasted trials", std::nullopt, {}};
  bool have_wasted = false;
  for (const auto& in : o.inputs) {
    const std::filesystem::path dir(in);
    const std::string title = panel_title(dir);
    panels.push_back(plot::competence_panel(plot::read_text(dir / "competence_agg.csv"), title));
    if (std::filesystem::exists(dir / "wasted_agg.csv")) {
      wasted.series.push_back(plot::wasted_series(plot::read_text(dir / "wasted_agg.csv"), title));
      have_wasted = true;
    }
  }
  const std::string svg = plot::render_svg(panels, have_wasted ? std::optional(wasted) : std::nullopt);
  std::filesystem::path target = o.output.empty() ? output_dir("") / "plot.svg" : std::filesystem::path(o.output);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  write_file(target, svg);
  if (verbosity > 0) out << "wrote " << target.string() << '\n';
  return kOk;
}

inline int cmd_validate(const std::string& scenario, std::ostream& out) {
  const ExperimentConfig cfg = resolve_scenario(scenario, {});
  validate(cfg.scenario);
  out << "scenario " << cfg.scenario.name << ": " << cfg.scenario.num_goals() << " goals\n";
  for (const auto& line : describe_graph(cfg.scenario)) out << "  " << line << '\n';
  out << "ok\n";
  return kOk;
}

/// Parses argv and runs one subcommand. Errors are reported on `err`.
inline int main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Intrinsically motivated goal selection experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  int verbose = 0;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "More output");
  app.add_flag("-q,--quiet", quiet, "Only errors");

  RunOptions ro;
  auto* run = app.add_subcommand("run", "Run an experiment and write CSV outputs");
  run->add_option("-s,--scenario", ro.scenario, "Built-in scenario id (1, 2, 3) or scenario/config file");
  run->add_option("-c,--config", ro.config, "Experiment config file (JSON)");
  run->add_option("--system", ro.system, "grail, c_grail or m_grail");
  run->add_option("--backend", ro.backend, "idealized or actor_critic");
  run->add_option("--seed", ro.seed, "Seed base");
  run->add_option("-r,--replications", ro.replications, "Number of replications");
  run->add_option("-o,--output", ro.output, std::string("Output directory (default $") + kOutputEnv + " or ./results)");
  run->add_option("-j,--jobs", ro.jobs, "Replications run in parallel");
  run->add_flag("--dump-values", ro.dump_values, "Write goal-selector value tables");
  run->add_flag("--print-config", ro.print_config, "Print the effective configuration and exit");

  PlotOptions po;
  auto* plt = app.add_subcommand("plot", "Render SVG curves from run output directories");
  plt->add_option("inputs", po.inputs, "Run output directories, one competence panel each")->required();
  plt->add_option("-o,--output", po.output, "SVG file to write");

  std::string vscenario;
  auto* val = app.add_subcommand("validate", "Check a scenario and print its dependency graph");
  val->add_option("scenario", vscenario, "Built-in scenario id or scenario file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
  const int verbosity = quiet ? 0 : 1 + verbose;

  try {
    if (*run) return cmd_run(ro, verbosity, out);
    if (*plt) return cmd_plot(po, verbosity, out);
    return cmd_validate(vscenario, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumericError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}

}  // namespace grail::cli
