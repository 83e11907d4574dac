#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "safenav/error.hpp"
#include "safenav/log.hpp"
#include "safenav/planner/planner.hpp"
#include "safenav/runtime.hpp"
#include "safenav/scenario.hpp"
#include "safenav/tne.hpp"
#include "safenav/traces.hpp"

namespace safenav::app {

enum ExitCode : int { kOk = 0, kFailure = 1, kValidation = 2, kInfeasible = 3, kViolation = 4 };

struct TrialOutput {
  std::uint64_t seed{0};
  runtime::EpisodeResult result;
};

namespace detail {

namespace fs = std::filesystem;

inline void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + p.string() + "'");
}

inline std::string path_csv(const traces::TimedPath& path) {
  std::ostringstream ss;
  traces::write_path_csv(ss, path);
  return ss.str();
}

inline std::string trial_dir(std::size_t i) {
  std::ostringstream ss;
  ss << "trial_" << std::setw(3) << std::setfill('0') << i;
  return ss.str();
}

inline runtime::ExecutionLog read_log_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open '" + p.string() + "'");
  return runtime::read_log(in);
}

inline void apply_mode(Scenario& sc, const std::string& mode) {
  if (mode.empty()) return;
  if (!sc.find_mode(mode)) throw ScenarioError(ScenarioErrorKind::Invalid, "unknown mode '" + mode + "'");
  sc.initial_mode = mode;
}

}  // namespace detail

/// Runs `trials` episodes with seeds derived from `master` by trial index.
inline std::vector<TrialOutput> run_trials(const Scenario& sc, std::uint64_t master, int trials) {
  std::vector<std::future<TrialOutput>> jobs;
  for (int i = 0; i < trials; ++i) {
    const std::uint64_t seed = runtime::derive_seed(master, static_cast<std::uint64_t>(i));
    jobs.push_back(std::async(std::launch::async, [&sc, seed] {
      return TrialOutput{seed, runtime::run_episode(sc, {seed, std::nullopt})};
    }));
  }
  std::vector<TrialOutput> out;
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

/// Writes one trial's artifacts: log.jsonl, trace.csv, plan_NN.csv, metrics.json.
inline void write_trial(const TrialOutput& t, const std::filesystem::path& dir) {
  std::ostringstream log;
  runtime::write_log(log, t.result.log);
  detail::write_text(dir / "log.jsonl", log.str());
  std::ostringstream trace;
  traces::write_trace_csv(trace, t.result.trace);
  detail::write_text(dir / "trace.csv", trace.str());
  for (std::size_t k = 0; k < t.result.plans.size(); ++k) {
    std::ostringstream name;
    name << "plan_" << std::setw(2) << std::setfill('0') << k << ".csv";
    detail::write_text(dir / name.str(), detail::path_csv(t.result.plans[k].path));
  }
  detail::write_text(dir / "metrics.json", tne::metrics_to_json(t.result.metrics).dump(2) + "\n");
}

inline int cmd_certify(const std::string& scenario_path, std::optional<std::uint64_t> seed,
                       const std::string& out_dir, const std::string& mode, std::ostream& out) {
  Scenario sc = load_scenario(scenario_path);
  detail::apply_mode(sc, mode);
  const std::uint64_t s = runtime::derive_seed(seed.value_or(sc.seed), 0);
  const auto r = runtime::certify_from_start(sc, {s, std::nullopt});
  const std::filesystem::path dir = out_dir.empty() ? "." : out_dir;
  detail::write_text(dir / "path.csv", detail::path_csv(r.plan.path));
  auto report = planner::report_to_json(r.plan.report);
  report["rounds"] = r.plan.rounds;
  detail::write_text(dir / "screening.json", report.dump(2) + "\n");
  out << "certified " << r.plan.path.size() << " waypoints, " << r.plan.rounds << " repair rounds\n";
  for (const auto& res : r.plan.report.results)
    out << "  " << res.id << " " << traces::format_double(res.robustness) << " " << stl::status_name(res.status)
        << "\n";
  return kOk;
}

inline int cmd_run(const std::string& scenario_path, std::optional<int> trials, std::optional<std::uint64_t> seed,
                   const std::string& out_dir, const std::string& mode, std::ostream& out) {
  Scenario sc = load_scenario(scenario_path);
  detail::apply_mode(sc, mode);
  const int n = trials.value_or(sc.trials);
  if (n < 1) throw ScenarioError(ScenarioErrorKind::Invalid, "trial count must be at least 1");
  const auto results = run_trials(sc, seed.value_or(sc.seed), n);
  const std::filesystem::path dir = out_dir.empty() ? "." : out_dir;
  std::vector<tne::RunMetrics> metrics;
  int code = kOk;
  for (std::size_t i = 0; i < results.size(); ++i) {
    write_trial(results[i], dir / detail::trial_dir(i));
    metrics.push_back(results[i].result.metrics);
    const int c = runtime::outcome_exit_code(results[i].result.outcome);
    if (c != kOk && (code == kOk || c < code)) code = c;
    out << detail::trial_dir(i) << " " << results[i].result.outcome << " ticks "
        << results[i].result.log.ticks().size() << " replans " << results[i].result.metrics.replan_count << "\n";
  }
  try {
    tne::emit_report(tne::aggregate(metrics), dir);
  } catch (const IoError&) {
    throw;
  } catch (const Error& e) {
    out << "report skipped: " << e.what() << "\n";
  }
  return code;
}

inline int cmd_screen(const std::string& path_file, const std::string& scenario_path, const std::string& mode,
                      const std::string& out_dir, std::ostream& out) {
  Scenario sc = load_scenario(scenario_path);
  detail::apply_mode(sc, mode);
  std::ifstream in(path_file, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path_file + "'");
  const traces::TimedPath path = traces::read_path_csv(in);
  const auto report =
      planner::screen_plan(path, hard_specs(sc.mode(sc.initial_mode)), *sc.world, sc.signals, sc.eval);
  const std::string text = planner::report_to_json(report).dump(2) + "\n";
  if (!out_dir.empty()) detail::write_text(std::filesystem::path(out_dir) / "screening.json", text);
  out << text;
  return kOk;
}

inline int cmd_replay(const std::string& log_file, const std::string& out_dir, std::ostream& out) {
  const auto log = detail::read_log_file(log_file);
  const auto metrics = tne::replay_metrics(log);
  const std::string text = tne::metrics_to_json(metrics).dump(2) + "\n";
  if (!out_dir.empty()) detail::write_text(std::filesystem::path(out_dir) / "metrics.json", text);
  out << text;
  return kOk;
}

inline int cmd_report(const std::vector<std::string>& files, const std::string& out_dir, std::ostream& out) {
  std::vector<tne::RunMetrics> runs;
  for (const auto& f : files) runs.push_back(tne::metrics_from_json(read_json_file(f)));
  const auto report = tne::aggregate(runs);
  tne::emit_report(report, out_dir.empty() ? std::filesystem::path(".") : std::filesystem::path(out_dir));
  tne::write_report_csv(out, report);
  return kOk;
}

/// Plot-ready series: running robustness of every active spec per tick.
inline void write_plot_csv(std::ostream& out, const runtime::ExecutionLog& log) {
  out << "tick,t,mode,spec_id,robustness,status\n";
  for (const auto* t : log.ticks())
    for (const auto& v : t->verdicts)
      out << t->tick << ',' << traces::format_double(t->t) << ',' << t->mode << ',' << v.spec << ','
          << traces::format_double(v.robustness) << ',' << stl::status_name(v.status) << '\n';
}

inline int cmd_plot(const std::string& log_file, const std::string& out_dir, std::ostream& out) {
  const auto log = detail::read_log_file(log_file);
  std::ostringstream ss;
  write_plot_csv(ss, log);
  if (!out_dir.empty()) detail::write_text(std::filesystem::path(out_dir) / "plot.csv", ss.str());
  else out << ss.str();
  return kOk;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Rule-checked navigation: certify, run, screen, replay, report, plot"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed;
  std::string out_dir, mode;
  app.add_option("--seed", seed, "master seed (defaults to the scenario's)");
  app.add_option("--out-dir", out_dir, "directory for written artifacts");
  app.add_option("--mode", mode, "force the initial mode");

  std::string scenario, path_file, log_file;
  std::optional<int> trials;
  std::vector<std::string> metric_files;

  auto* certify = app.add_subcommand("certify", "plan, screen and repair; write path.csv and screening.json");
  certify->add_option("scenario", scenario)->required();
  auto* run = app.add_subcommand("run", "execute episodes and write logs, metrics and a report");
  run->add_option("scenario", scenario)->required();
  run->add_option("--trials", trials, "number of episodes");
  auto* screen = app.add_subcommand("screen", "screen an external x,y,t path");
  screen->add_option("path", path_file)->required();
  screen->add_option("scenario", scenario)->required();
  auto* replay = app.add_subcommand("replay", "recompute monitors and metrics from a log");
  replay->add_option("log", log_file)->required();
  auto* report = app.add_subcommand("report", "aggregate metrics.json files");
  report->add_option("metrics", metric_files)->required();
  auto* plot = app.add_subcommand("plot", "robustness-vs-time CSV from a log");
  plot->add_option("log", log_file)->required();
  for (auto* sub : {certify, run, screen, replay, report, plot}) {
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--out-dir", out_dir, "directory for written artifacts");
    sub->add_option("--mode", mode, "force the initial mode");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*certify) return cmd_certify(scenario, seed, out_dir, mode, out);
    if (*run) return cmd_run(scenario, trials, seed, out_dir, mode, out);
    if (*screen) return cmd_screen(path_file, scenario, mode, out_dir, out);
    if (*replay) return cmd_replay(log_file, out_dir, out);
    if (*report) return cmd_report(metric_files, out_dir, out);
    if (*plot) return cmd_plot(log_file, out_dir, out);
  } catch (const ScenarioError& e) {
    err << "error: " << scenario_error_name(e.kind()) << ": " << e.what() << "\n";
    return kValidation;
  } catch (const planner::InfeasibleError& e) {
    err << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const planner::IrreparableError& e) {
    err << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const TraceError& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}

}  // namespace safenav::app
