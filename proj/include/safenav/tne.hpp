#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "safenav/error.hpp"
#include "safenav/log.hpp"
#include "safenav/stl/monitor.hpp"
#include "safenav/stl/parser.hpp"
#include "safenav/traces.hpp"

namespace safenav::tne {

/// Everything a monitor reported for one spec over a run.
struct SpecHistory {
  std::string spec;
  std::vector<stl::InstantRobustness> settled;  // in settlement order
  bool finalized{false};
  stl::Status final_status{stl::Status::Inconclusive};
  double final_robustness{stl::kCap};
};

struct RunTotals {
  double path_cost{0.0};
  double duration{0.0};
  std::size_t replans{0};
  std::size_t mode_switches{0};
  bool goal_reached{false};
  std::vector<std::string> labels;
  std::vector<double> cost_by_label;
};

struct SpecMetrics {
  std::string spec;
  double final_robustness{0.0};
  std::string final_status;
  double worst_case{0.0};
  double average_margin{0.0};
  /// Maximal runs of consecutive negative instants.
  std::size_t violation_count{0};
  std::size_t violation_ticks{0};
  double average_violation_magnitude{0.0};
  std::size_t instants{0};
};

struct RunMetrics {
  std::vector<SpecMetrics> specs;
  double total_path_cost{0.0};
  double episode_duration{0.0};
  std::size_t replan_count{0};
  std::size_t mode_switch_count{0};
  bool goal_reached{false};
  /// Share of the accrued path cost spent on each label (soft-preference report).
  std::map<std::string, double> cost_fraction;
};

inline SpecMetrics spec_metrics(const SpecHistory& h) {
  SpecMetrics m;
  m.spec = h.spec;
  m.final_robustness = h.final_robustness;
  m.final_status = stl::status_name(h.final_status);
  auto settled = h.settled;
  std::stable_sort(settled.begin(), settled.end(),
                   [](const auto& a, const auto& b) { return a.index < b.index; });
  m.instants = settled.size();
  if (settled.empty()) {
    m.worst_case = h.final_robustness;
    m.average_margin = h.final_robustness;
    return m;
  }
  double worst = stl::kCap, sum = 0.0, neg_sum = 0.0;
  bool in_run = false;
  std::size_t last_index = 0;
  for (const auto& s : settled) {
    worst = std::min(worst, s.value);
    sum += s.value;
    const bool neg = s.value < 0.0;
    if (neg) {
      ++m.violation_ticks;
      neg_sum += -s.value;
      if (!in_run || s.index != last_index + 1) ++m.violation_count;
    }
    in_run = neg;
    last_index = s.index;
  }
  m.worst_case = worst;
  m.average_margin = sum / static_cast<double>(settled.size());
  m.average_violation_magnitude =
      m.violation_ticks ? neg_sum / static_cast<double>(m.violation_ticks) : 0.0;
  return m;
}

inline RunMetrics run_metrics(const std::vector<SpecHistory>& histories, const RunTotals& totals) {
  RunMetrics r;
  for (const auto& h : histories) r.specs.push_back(spec_metrics(h));
  std::sort(r.specs.begin(), r.specs.end(),
            [](const SpecMetrics& a, const SpecMetrics& b) { return a.spec < b.spec; });
  r.total_path_cost = totals.path_cost;
  r.episode_duration = totals.duration;
  r.replan_count = totals.replans;
  r.mode_switch_count = totals.mode_switches;
  r.goal_reached = totals.goal_reached;
  for (std::size_t k = 0; k < totals.labels.size(); ++k)
    r.cost_fraction[totals.labels[k]] =
        totals.path_cost > 0.0 ? totals.cost_by_label[k] / totals.path_cost : 0.0;
  return r;
}

namespace detail {

inline SpecHistory& history_for(std::vector<SpecHistory>& hs, const std::string& spec) {
  for (auto& h : hs)
    if (h.spec == spec) return h;
  hs.push_back({spec, {}, false, stl::Status::Inconclusive, stl::kCap});
  return hs.back();
}

inline RunTotals totals_of(const runtime::ExecutionLog& log) {
  RunTotals t;
  t.labels = log.header.labels;
  t.cost_by_label.assign(t.labels.size(), 0.0);
  const auto ticks = log.ticks();
  for (const auto* tick : ticks) {
    t.path_cost += tick->cost;
    for (std::size_t k = 0; k < t.labels.size() && k < tick->cost_by_label.size(); ++k)
      t.cost_by_label[k] += tick->cost_by_label[k];
  }
  t.duration = ticks.empty() ? 0.0 : ticks.back()->t;
  t.replans = log.events("replan").size();
  t.mode_switches = log.events("mode_switch").size();
  t.goal_reached = !log.events("goal_reached").empty();
  return t;
}

inline void record_final(SpecHistory& h, stl::Status status, double robustness) {
  // Across several activations the final verdict is the worst one.
  if (!h.finalized || robustness < h.final_robustness) {
    h.final_robustness = robustness;
    h.final_status = status;
  }
  h.finalized = true;
}

}  // namespace detail

/// Metrics from the robustness values recorded in the log. Settled instants are
/// indexed by episode tick.
inline RunMetrics compute_run_metrics(const runtime::ExecutionLog& log) {
  std::vector<SpecHistory> hs;
  auto absorb = [&](const runtime::SpecVerdict& v) {
    SpecHistory& h = detail::history_for(hs, v.spec);
    h.settled.insert(h.settled.end(), v.settled.begin(), v.settled.end());
    return std::ref(h);
  };
  for (const auto& r : log.records) {
    if (auto* t = std::get_if<runtime::TickRecord>(&r)) {
      for (const auto& v : t->verdicts) absorb(v);
      continue;
    }
    const auto& e = std::get<runtime::EventRecord>(r);
    if (e.type != "monitor_final") continue;
    try {
      for (const auto& vj : e.detail.at("verdicts")) {
        const runtime::SpecVerdict v = runtime::json_verdict(vj);
        detail::record_final(absorb(v).get(), v.status, v.robustness);
      }
    } catch (const nlohmann::json::exception& ex) {
      throw FormatError(std::string("malformed monitor_final event: ") + ex.what());
    }
  }
  return run_metrics(hs, detail::totals_of(log));
}

/// Recomputes every monitor from the logged signal samples, without consulting
/// the robustness values stored in the log. Monitors restart whenever the mode
/// changes or a monitor_final event closes them.
inline std::vector<SpecHistory> replay_histories(const runtime::ExecutionLog& log) {
  const SignalSchema schema(log.header.signals);
  stl::EvalOptions eval;
  eval.eq_epsilon = log.header.eq_epsilon;
  std::map<std::string, std::vector<std::pair<std::string, stl::Formula>>> formulas;
  for (const auto& m : log.header.modes)
    for (const auto& [id, text] : m.specs) formulas[m.mode].push_back({id, stl::parse_formula(text, schema)});

  std::vector<SpecHistory> hs;
  std::vector<std::pair<std::string, stl::OnlineMonitor>> active;
  std::size_t base = 0;
  std::string mode;
  auto absorb = [&](const std::string& spec, const stl::OnlineMonitor& mon) -> SpecHistory& {
    SpecHistory& h = detail::history_for(hs, spec);
    for (const auto& s : mon.settled()) h.settled.push_back({base + s.index, s.value});
    return h;
  };
  auto close = [&] {
    for (auto& [spec, mon] : active) {
      const stl::Verdict v = mon.finalize();
      detail::record_final(absorb(spec, mon), v.status, v.robustness);
    }
    active.clear();
  };
  for (const auto& r : log.records) {
    if (auto* e = std::get_if<runtime::EventRecord>(&r)) {
      if (e->type == "monitor_final") close();
      continue;
    }
    const auto& t = std::get<runtime::TickRecord>(r);
    if (active.empty() || t.mode != mode) {
      close();
      mode = t.mode;
      base = t.tick;
      for (const auto& [id, f] : formulas[mode])
        active.push_back({id, stl::OnlineMonitor(f, schema, log.header.dt, eval)});
    }
    const Sample s{t.t, t.signals};
    for (auto& [spec, mon] : active) {
      mon.step(s);
      absorb(spec, mon);
    }
  }
  close();
  return hs;
}

inline RunMetrics replay_metrics(const runtime::ExecutionLog& log) {
  return run_metrics(replay_histories(log), detail::totals_of(log));
}

// ---------------------------------------------------------------------------
// Aggregation

struct AggregateRow {
  std::string spec;
  std::string metric;
  double mean{0.0};
  double std{0.0};
  double min{0.0};
  double max{0.0};
};

struct AggregateReport {
  std::size_t run_count{0};
  std::vector<AggregateRow> rows;

  const AggregateRow* find(const std::string& spec, const std::string& metric) const {
    for (const auto& r : rows)
      if (r.spec == spec && r.metric == metric) return &r;
    return nullptr;
  }
};

inline constexpr const char* kRunScope = "_run";

/// Flattens a run into (spec, metric, value) triples.
inline std::vector<std::tuple<std::string, std::string, double>> flatten(const RunMetrics& m) {
  std::vector<std::tuple<std::string, std::string, double>> out;
  for (const auto& s : m.specs) {
    out.emplace_back(s.spec, "final_robustness", s.final_robustness);
    out.emplace_back(s.spec, "worst_case", s.worst_case);
    out.emplace_back(s.spec, "average_margin", s.average_margin);
    out.emplace_back(s.spec, "violation_count", static_cast<double>(s.violation_count));
    out.emplace_back(s.spec, "violation_ticks", static_cast<double>(s.violation_ticks));
    out.emplace_back(s.spec, "average_violation_magnitude", s.average_violation_magnitude);
  }
  out.emplace_back(kRunScope, "total_path_cost", m.total_path_cost);
  out.emplace_back(kRunScope, "episode_duration", m.episode_duration);
  out.emplace_back(kRunScope, "replan_count", static_cast<double>(m.replan_count));
  out.emplace_back(kRunScope, "mode_switch_count", static_cast<double>(m.mode_switch_count));
  out.emplace_back(kRunScope, "goal_reached", m.goal_reached ? 1.0 : 0.0);
  for (const auto& [label, f] : m.cost_fraction) out.emplace_back(kRunScope, "cost_fraction." + label, f);
  return out;
}

/// Population statistics per (spec, metric). Values are sorted before summing
/// so the result does not depend on run order.
inline AggregateReport aggregate(const std::vector<RunMetrics>& runs) {
  if (runs.empty()) throw Error("cannot aggregate an empty run list");
  std::vector<std::pair<std::string, std::string>> keys;
  for (const auto& [spec, metric, v] : flatten(runs.front())) keys.push_back({spec, metric});
  std::map<std::pair<std::string, std::string>, std::vector<double>> values;
  for (const auto& run : runs) {
    auto flat = flatten(run);
    if (flat.size() != keys.size()) throw Error("runs report different spec sets");
    for (std::size_t i = 0; i < flat.size(); ++i) {
      const auto& [spec, metric, v] = flat[i];
      if (keys[i] != std::pair{spec, metric}) throw Error("runs report different spec sets");
      values[keys[i]].push_back(v);
    }
  }
  AggregateReport rep;
  rep.run_count = runs.size();
  for (const auto& key : keys) {
    auto v = values[key];
    std::sort(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v) sum += x;
    const double mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    rep.rows.push_back({key.first, key.second, mean, std::sqrt(ss / static_cast<double>(v.size())),
                        v.front(), v.back()});
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json metrics_to_json(const RunMetrics& m) {
  nlohmann::json j;
  j["schema"] = "safenav.metrics/1";
  j["specs"] = nlohmann::json::array();
  for (const auto& s : m.specs)
    j["specs"].push_back({{"spec", s.spec},
                          {"final_robustness", s.final_robustness},
                          {"final_status", s.final_status},
                          {"worst_case", s.worst_case},
                          {"average_margin", s.average_margin},
                          {"violation_count", s.violation_count},
                          {"violation_ticks", s.violation_ticks},
                          {"average_violation_magnitude", s.average_violation_magnitude},
                          {"instants", s.instants}});
  j["total_path_cost"] = m.total_path_cost;
  j["episode_duration"] = m.episode_duration;
  j["replan_count"] = m.replan_count;
  j["mode_switch_count"] = m.mode_switch_count;
  j["goal_reached"] = m.goal_reached;
  j["cost_fraction"] = m.cost_fraction;
  return j;
}

inline RunMetrics metrics_from_json(const nlohmann::json& j) {
  try {
    if (j.value("schema", "") != "safenav.metrics/1") throw FormatError("not a metrics document");
    RunMetrics m;
    for (const auto& s : j.at("specs"))
      m.specs.push_back({s.at("spec").get<std::string>(), s.at("final_robustness").get<double>(),
                         s.at("final_status").get<std::string>(), s.at("worst_case").get<double>(),
                         s.at("average_margin").get<double>(), s.at("violation_count").get<std::size_t>(),
                         s.at("violation_ticks").get<std::size_t>(),
                         s.at("average_violation_magnitude").get<double>(),
                         s.at("instants").get<std::size_t>()});
    m.total_path_cost = j.at("total_path_cost").get<double>();
    m.episode_duration = j.at("episode_duration").get<double>();
    m.replan_count = j.at("replan_count").get<std::size_t>();
    m.mode_switch_count = j.at("mode_switch_count").get<std::size_t>();
    m.goal_reached = j.at("goal_reached").get<bool>();
    m.cost_fraction = j.at("cost_fraction").get<std::map<std::string, double>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed metrics document: ") + e.what());
  }
}

inline void write_report_csv(std::ostream& out, const AggregateReport& r) {
  using traces::format_double;
  out << "spec_id,metric,value\n";
  out << kRunScope << ",run_count," << r.run_count << '\n';
  for (const auto& row : r.rows) {
    out << row.spec << ',' << row.metric << ".mean," << format_double(row.mean) << '\n';
    out << row.spec << ',' << row.metric << ".std," << format_double(row.std) << '\n';
    out << row.spec << ',' << row.metric << ".min," << format_double(row.min) << '\n';
    out << row.spec << ',' << row.metric << ".max," << format_double(row.max) << '\n';
  }
}

inline nlohmann::json report_to_json(const AggregateReport& r) {
  nlohmann::json j;
  j["schema"] = "safenav.report/1";
  j["run_count"] = r.run_count;
  j["rows"] = nlohmann::json::array();
  for (const auto& row : r.rows)
    j["rows"].push_back({{"spec", row.spec},
                         {"metric", row.metric},
                         {"mean", row.mean},
                         {"std", row.std},
                         {"min", row.min},
                         {"max", row.max}});
  return j;
}

/// Writes `<dir>/report.csv` and `<dir>/report.json`.
inline void emit_report(const AggregateReport& r, const std::filesystem::path& dir) {
  if (dir.empty()) throw IoError("report destination is empty");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  std::ofstream csv(dir / "report.csv", std::ios::binary);
  std::ofstream js(dir / "report.json", std::ios::binary);
  if (!csv || !js) throw IoError("cannot write report into '" + dir.string() + "'");
  write_report_csv(csv, r);
  js << report_to_json(r).dump(2) << '\n';
  if (!csv || !js) throw IoError("failed writing report into '" + dir.string() + "'");
}

}  // namespace safenav::tne
