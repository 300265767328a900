#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "grail/cli.hpp"

using namespace grail;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "grail");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path temp_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST(Cli, ValidateBuiltinScenario3) {
  const auto r = invoke({"validate", "3"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("d -> c -> e"), std::string::npos);
  EXPECT_NE(r.out.find("b -> f -> a"), std::string::npos);
  EXPECT_NE(r.out.find("d -| b"), std::string::npos);
}

TEST(Cli, ValidateCycleFails) {
  const auto dir = temp_dir("grail_cli_cycle");
  fs::create_directories(dir);
  write(dir / "cycle.json", R"({"goals": ["a", "b"], "rules": [
    {"goal": "a", "requires_on": ["b"]}, {"goal": "b", "requires_on": ["a"]}]})");
  const auto r = invoke({"validate", (dir / "cycle.json").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("a -> b -> a"), std::string::npos);
}

TEST(Cli, ValidateUnreachableSphereFails) {
  const auto dir = temp_dir("grail_cli_reach");
  fs::create_directories(dir);
  write(dir / "far.json", R"({"goals": [{"label": "a"}, {"label": "far", "position": [0.0, 3.0]}]})");
  const auto r = invoke({"validate", (dir / "far.json").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("'far'"), std::string::npos);
}

TEST(Cli, RunRejectsUnknownSystem) {
  const auto out = temp_dir("grail_cli_badsys");
  const auto r = invoke({"run", "--scenario", "1", "--system", "z_grail", "--output", out.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("grail, c_grail, m_grail"), std::string::npos);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, RunMissingConfig) {
  const auto r = invoke({"run", "--config", "/nonexistent/cfg.json"});
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, RunInvalidScenarioWritesNothing) {
  const auto dir = temp_dir("grail_cli_invalid");
  fs::create_directories(dir);
  write(dir / "cycle.json", R"({"goals": ["a", "b"], "rules": [
    {"goal": "a", "requires_on": ["b"]}, {"goal": "b", "requires_on": ["a"]}]})");
  const auto out = dir / "out";
  const auto r = invoke({"run", "--scenario", (dir / "cycle.json").string(), "--output", out.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, RunNumericFailureExit3) {
  const auto dir = temp_dir("grail_cli_nan");
  fs::create_directories(dir);
  write(dir / "cfg.json", R"({"scenario": 1, "replications": 1, "selector": {"bandit_smoothing": 1e308},
    "predictor": {"learning_rate": 1e308}})");
  const auto r = invoke({"run", "--config", (dir / "cfg.json").string(), "--output", (dir / "out").string()});
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_FALSE(fs::exists(dir / "out" / "trials.csv"));
}

TEST(Cli, RunIsDeterministic) {
  const auto a = temp_dir("grail_cli_run_a"), b = temp_dir("grail_cli_run_b");
  for (const auto& d : {a, b}) {
    const auto r = invoke({"run", "--scenario", "3", "--system", "m_grail", "--backend", "idealized", "--seed", "42",
                           "--replications", "2", "--output", d.string(), "-q"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  for (const char* f : {"trials.csv", "competence.csv", "wasted.csv", "competence_agg.csv", "wasted_agg.csv"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  EXPECT_EQ(slurp(a / "trials.csv").substr(0, 64).find("replication,trial,epoch,state_key,goal"), 0u);
}

TEST(Cli, OutputDirFromEnvironment) {
  const auto d = temp_dir("grail_cli_env");
  ::setenv(cli::kOutputEnv, d.string().c_str(), 1);
  const auto r = invoke({"run", "--scenario", "1", "--replications", "1", "-q"});
  ::unsetenv(cli::kOutputEnv);
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(d / "competence_agg.csv"));
}

TEST(Cli, PrintConfigShowsDefaults) {
  const auto r = invoke({"run", "--scenario", "2", "--system", "c_grail", "--print-config"});
  EXPECT_EQ(r.code, 0);
  const auto j = Json::parse(r.out);
  EXPECT_EQ(j["system"], "c_grail");
  EXPECT_EQ(j["replications"], 10);
  EXPECT_EQ(j["timeout_steps"], 800);
  EXPECT_EQ(j["selector"]["q_discount"], 0.3);
  EXPECT_EQ(j["predictor"]["gate_threshold"], 0.05);
}

TEST(Cli, PlotIsByteIdenticalAndLabelled) {
  const auto g = temp_dir("grail_cli_plot_g"), c = temp_dir("grail_cli_plot_c");
  ASSERT_EQ(invoke({"run", "-s", "2", "--system", "grail", "-r", "2", "-o", g.string(), "-q"}).code, 0);
  ASSERT_EQ(invoke({"run", "-s", "2", "--system", "c_grail", "-r", "2", "-o", c.string(), "-q"}).code, 0);
  const auto svg1 = g / "p1.svg", svg2 = g / "p2.svg";
  ASSERT_EQ(invoke({"plot", g.string(), c.string(), "-o", svg1.string(), "-q"}).code, 0);
  ASSERT_EQ(invoke({"plot", g.string(), c.string(), "-o", svg2.string(), "-q"}).code, 0);
  const std::string text = slurp(svg1);
  EXPECT_EQ(text, slurp(svg2));
  std::size_t series = 0;
  for (auto pos = text.find("class=\"series\""); pos != std::string::npos; pos = text.find("class=\"series\"", pos + 1))
    ++series;
  EXPECT_EQ(series, 6u + 6u + 2u);  // two competence panels, two wasted curves
  for (const char* label : {"data-label=\"a\"", "data-label=\"f\"", ">grail<", ">c_grail<"})
    EXPECT_NE(text.find(label), std::string::npos) << label;
}

TEST(Cli, PlotEmptyCsvFailsWithoutFile) {
  const auto d = temp_dir("grail_cli_plot_empty");
  fs::create_directories(d);
  write(d / "competence_agg.csv", "");
  const auto svg = d / "out.svg";
  const auto r = invoke({"plot", d.string(), "-o", svg.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(fs::exists(svg));

  write(d / "competence_agg.csv", "trial_index,goal,mean,ci_low,ci_high\n");
  EXPECT_EQ(invoke({"plot", d.string(), "-o", svg.string()}).code, 2);
  EXPECT_FALSE(fs::exists(svg));
}

TEST(Cli, PlotMissingCsv) {
  const auto d = temp_dir("grail_cli_plot_missing");
  fs::create_directories(d);
  EXPECT_EQ(invoke({"plot", d.string(), "-o", (d / "x.svg").string()}).code, 2);
}

TEST(Cli, BadFlagIsConfigError) { EXPECT_EQ(invoke({"run", "--replicates", "3"}).code, 2); }
