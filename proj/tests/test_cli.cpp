#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code{-1};
  std::string out;
};

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("safenav_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Result cli(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt";
  const std::string cmd = std::string("\"") + SAFENAV_CLI + "\" " + args + " > \"" + out.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  return r;
}

std::string scenario(const std::string& name) {
  return "\"" + testsupport::source_path("scenarios/" + name) + "\"";
}

}  // namespace

TEST(Cli, CertifyWritesPathAndReport) {
  const auto dir = scratch("certify");
  const Result r = cli("certify " + scenario("scenario_normal.json") + " --out-dir \"" + dir.string() + "\"", dir);
  ASSERT_EQ(r.code, 0) << r.out;
  const auto report = nlohmann::json::parse(slurp(dir / "screening.json"));
  EXPECT_TRUE(report.at("accepted").get<bool>());
  EXPECT_EQ(report.at("specs").size(), 5u);
  std::ifstream in(dir / "path.csv");
  const auto path = safenav::traces::read_path_csv(in);
  EXPECT_GT(path.size(), 1u);
}

TEST(Cli, ModeFlagSelectsRules) {
  const auto dir = scratch("mode");
  const Result r = cli("certify " + scenario("scenario_normal.json") + " --mode low_battery --out-dir \"" +
                           dir.string() + "\"",
                       dir);
  ASSERT_EQ(r.code, 0) << r.out;
  const auto report = nlohmann::json::parse(slurp(dir / "screening.json"));
  for (const auto& s : report.at("specs")) EXPECT_EQ(s.at("id").get<std::string>().rfind("low_battery/", 0), 0u);
  EXPECT_EQ(cli("certify " + scenario("scenario_normal.json") + " --mode turbo", dir).code, 2);
}

TEST(Cli, RunReplayReportPlotChain) {
  const auto dir = scratch("run");
  const Result r = cli("run " + scenario("scenario_disturbance.json") + " --trials 2 --seed 7 --out-dir \"" +
                           dir.string() + "\"",
                       dir);
  ASSERT_EQ(r.code, 0) << r.out;
  for (const char* f : {"trial_000/log.jsonl", "trial_000/trace.csv", "trial_000/plan_00.csv", "trial_000/plan_01.csv",
                        "trial_000/metrics.json", "trial_001/log.jsonl", "report.csv", "report.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;

  const Result rep = cli("replay \"" + (dir / "trial_000/log.jsonl").string() + "\"", dir);
  ASSERT_EQ(rep.code, 0) << rep.out;
  const auto replayed = safenav::tne::metrics_from_json(nlohmann::json::parse(rep.out));
  const auto live = safenav::tne::metrics_from_json(nlohmann::json::parse(slurp(dir / "trial_000/metrics.json")));
  const auto a = safenav::tne::flatten(replayed), b = safenav::tne::flatten(live);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(std::get<2>(a[i]), std::get<2>(b[i]), 1e-9);

  const auto agg = dir / "agg";
  const Result rr = cli("report \"" + (dir / "trial_000/metrics.json").string() + "\" \"" +
                            (dir / "trial_001/metrics.json").string() + "\" --out-dir \"" + agg.string() + "\"",
                        dir);
  ASSERT_EQ(rr.code, 0) << rr.out;
  EXPECT_NE(slurp(agg / "report.csv").find("_run,run_count,2"), std::string::npos);
  EXPECT_EQ(slurp(agg / "report.csv"), rr.out);

  const Result p = cli("plot \"" + (dir / "trial_000/log.jsonl").string() + "\"", dir);
  ASSERT_EQ(p.code, 0) << p.out;
  EXPECT_EQ(p.out.rfind("tick,t,mode,spec_id,robustness,status\n", 0), 0u);
  EXPECT_NE(p.out.find("normal/rule1"), std::string::npos);
}

TEST(Cli, ScreenExternalPath) {
  const auto dir = scratch("screen");
  std::ofstream(dir / "p.csv") << "x,y,t\n2,2,0\n2,10,8\n";
  const Result r = cli("screen \"" + (dir / "p.csv").string() + "\" " + scenario("scenario_disturbance.json"), dir);
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_TRUE(j.at("accepted").get<bool>());
  std::ofstream(dir / "bad.csv") << "x,y,t\n2,2,0\n2,10,0\n";
  EXPECT_EQ(cli("screen \"" + (dir / "bad.csv").string() + "\" " + scenario("scenario_disturbance.json"), dir).code,
            2);
}

TEST(Cli, ValidationErrorsExitTwo) {
  const auto dir = scratch("invalid");
  for (const char* f : {"invalid/unknown_label.json", "invalid/missing_cost.json", "invalid/bad_spec.json",
                        "invalid/parse_error.json"}) {
    const Result r = cli("certify " + scenario(f), dir);
    EXPECT_EQ(r.code, 2) << f << ": " << r.out;
  }
  EXPECT_NE(cli("certify " + scenario("invalid/unknown_label.json"), dir).out.find("unknown-label"),
            std::string::npos);
  EXPECT_EQ(cli("", dir).code, 2);
  EXPECT_EQ(cli("frobnicate", dir).code, 2);
  EXPECT_EQ(cli("run", dir).code, 2);
}

TEST(Cli, InfeasibleExitsThree) {
  const auto dir = scratch("infeasible");
  auto j = safenav::read_json_file(testsupport::source_path("scenarios/scenario_normal.json"));
  j["world"] = testsupport::source_path("scenarios/worlds/campus.json");
  j["goal"] = {20.0, 45.0};  // inside a tree
  std::ofstream(dir / "s.json") << j.dump(2);
  const std::string s = "\"" + (dir / "s.json").string() + "\"";
  EXPECT_EQ(cli("certify " + s, dir).code, 3);
  const Result r = cli("run " + s + " --trials 1 --out-dir \"" + (dir / "out").string() + "\"", dir);
  EXPECT_EQ(r.code, 3) << r.out;
  EXPECT_NE(slurp(dir / "out/trial_000/log.jsonl").find("\"infeasible\""), std::string::npos);
}

TEST(Cli, OutcomeCodes) {
  using safenav::runtime::outcome_exit_code;
  EXPECT_EQ(outcome_exit_code("goal_reached"), 0);
  EXPECT_EQ(outcome_exit_code("budget_exhausted"), 0);
  EXPECT_EQ(outcome_exit_code("infeasible"), 3);
  EXPECT_EQ(outcome_exit_code("violation_terminal"), 4);
}
