#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

#include "safenav/error.hpp"
#include "safenav/robot_state.hpp"
#include "safenav/signals.hpp"
#include "safenav/stl/monitor.hpp"

namespace safenav::runtime {

inline constexpr const char* kLogSchema = "safenav.log/1";

struct SpecVerdict {
  std::string spec;
  stl::Status status{stl::Status::Inconclusive};
  double robustness{stl::kCap};
  /// Per-instant robustness settled on this tick, indexed by episode tick.
  std::vector<stl::InstantRobustness> settled;
};

struct TickRecord {
  std::size_t tick{0};
  double t{0.0};
  std::string mode;
  RobotState state;
  double commanded_kph{0.0};
  std::vector<double> signals;
  /// Map cost accrued moving from the previous tick's position to this one.
  double cost{0.0};
  std::vector<double> cost_by_label;
  std::vector<SpecVerdict> verdicts;
};

struct EventRecord {
  std::string type;
  std::size_t tick{0};
  double t{0.0};
  nlohmann::json detail = nlohmann::json::object();
};

using LogRecord = std::variant<TickRecord, EventRecord>;

struct ModeSpecs {
  std::string mode;
  std::vector<std::pair<std::string, std::string>> specs;  // (id, formula text)
};

struct LogHeader {
  std::string scenario;
  std::uint64_t seed{0};
  double dt{0.5};
  std::vector<SignalSpec> signals;
  std::vector<std::string> labels;
  double eq_epsilon{0.05};
  std::vector<ModeSpecs> modes;
  RobotState start;
};

struct ExecutionLog {
  LogHeader header;
  std::vector<LogRecord> records;

  std::vector<const TickRecord*> ticks() const {
    std::vector<const TickRecord*> out;
    for (const auto& r : records)
      if (auto* t = std::get_if<TickRecord>(&r)) out.push_back(t);
    return out;
  }
  std::vector<const EventRecord*> events(const std::string& type = {}) const {
    std::vector<const EventRecord*> out;
    for (const auto& r : records)
      if (auto* e = std::get_if<EventRecord>(&r))
        if (type.empty() || e->type == type) out.push_back(e);
    return out;
  }
  std::string outcome() const {
    auto ends = events("end");
    return ends.empty() ? std::string() : ends.back()->detail.value("outcome", "");
  }
};

namespace detail {

inline stl::Status status_from_name(const std::string& s) {
  if (s == "satisfied") return stl::Status::Satisfied;
  if (s == "violated") return stl::Status::Violated;
  if (s == "inconclusive") return stl::Status::Inconclusive;
  throw FormatError("unknown verdict '" + s + "'");
}

inline nlohmann::json state_json(const RobotState& s) {
  return {{"x", s.position.x}, {"y", s.position.y}, {"speed", s.speed_kph},
          {"heading", s.heading}, {"battery", s.battery}, {"t", s.t}};
}

inline RobotState json_state(const nlohmann::json& j) {
  RobotState s;
  s.position = {j.at("x").get<double>(), j.at("y").get<double>()};
  s.speed_kph = j.at("speed").get<double>();
  s.heading = j.at("heading").get<double>();
  s.battery = j.at("battery").get<double>();
  s.t = j.at("t").get<double>();
  return s;
}

}  // namespace detail

inline nlohmann::json verdict_json(const SpecVerdict& v) {
  nlohmann::json settled = nlohmann::json::array();
  for (const auto& s : v.settled) settled.push_back({s.index, s.value});
  return {{"spec", v.spec},
          {"status", stl::status_name(v.status)},
          {"robustness", v.robustness},
          {"settled", std::move(settled)}};
}

inline SpecVerdict json_verdict(const nlohmann::json& j) {
  SpecVerdict v;
  v.spec = j.at("spec").get<std::string>();
  v.status = detail::status_from_name(j.at("status").get<std::string>());
  v.robustness = j.at("robustness").get<double>();
  for (const auto& s : j.at("settled"))
    v.settled.push_back({s.at(0).get<std::size_t>(), s.at(1).get<double>()});
  return v;
}

inline nlohmann::json header_json(const LogHeader& h) {
  nlohmann::json j;
  j["record"] = "header";
  j["schema"] = kLogSchema;
  j["scenario"] = h.scenario;
  j["seed"] = h.seed;
  j["dt"] = h.dt;
  j["signals"] = nlohmann::json::array();
  for (const auto& s : h.signals)
    j["signals"].push_back({{"name", s.name},
                            {"kind", s.kind == SignalKind::Boolean ? "bool" : "real"},
                            {"unit", s.unit}});
  j["labels"] = h.labels;
  j["eq_epsilon"] = h.eq_epsilon;
  j["modes"] = nlohmann::json::array();
  for (const auto& m : h.modes) {
    nlohmann::json specs = nlohmann::json::array();
    for (const auto& [id, text] : m.specs) specs.push_back({{"id", id}, {"formula", text}});
    j["modes"].push_back({{"mode", m.mode}, {"specs", std::move(specs)}});
  }
  j["start"] = detail::state_json(h.start);
  return j;
}

inline LogHeader json_header(const nlohmann::json& j) {
  if (j.value("record", "") != "header") throw FormatError("log does not start with a header");
  if (j.value("schema", "") != kLogSchema)
    throw FormatError("unsupported log schema '" + j.value("schema", "") + "'");
  LogHeader h;
  h.scenario = j.at("scenario").get<std::string>();
  h.seed = j.at("seed").get<std::uint64_t>();
  h.dt = j.at("dt").get<double>();
  for (const auto& s : j.at("signals"))
    h.signals.push_back({s.at("name").get<std::string>(),
                         s.at("kind").get<std::string>() == "bool" ? SignalKind::Boolean : SignalKind::Real,
                         s.at("unit").get<std::string>()});
  h.labels = j.at("labels").get<std::vector<std::string>>();
  h.eq_epsilon = j.at("eq_epsilon").get<double>();
  for (const auto& m : j.at("modes")) {
    ModeSpecs ms{m.at("mode").get<std::string>(), {}};
    for (const auto& s : m.at("specs"))
      ms.specs.push_back({s.at("id").get<std::string>(), s.at("formula").get<std::string>()});
    h.modes.push_back(std::move(ms));
  }
  h.start = detail::json_state(j.at("start"));
  return h;
}

inline nlohmann::json record_json(const LogRecord& r) {
  if (auto* t = std::get_if<TickRecord>(&r)) {
    nlohmann::json verdicts = nlohmann::json::array();
    for (const auto& v : t->verdicts) verdicts.push_back(verdict_json(v));
    return {{"record", "tick"},
            {"tick", t->tick},
            {"t", t->t},
            {"mode", t->mode},
            {"state", detail::state_json(t->state)},
            {"commanded_kph", t->commanded_kph},
            {"signals", t->signals},
            {"cost", t->cost},
            {"cost_by_label", t->cost_by_label},
            {"verdicts", std::move(verdicts)}};
  }
  const auto& e = std::get<EventRecord>(r);
  return {{"record", "event"}, {"type", e.type}, {"tick", e.tick}, {"t", e.t}, {"detail", e.detail}};
}

inline LogRecord json_record(const nlohmann::json& j) {
  const std::string kind = j.at("record").get<std::string>();
  if (kind == "tick") {
    TickRecord t;
    t.tick = j.at("tick").get<std::size_t>();
    t.t = j.at("t").get<double>();
    t.mode = j.at("mode").get<std::string>();
    t.state = detail::json_state(j.at("state"));
    t.commanded_kph = j.at("commanded_kph").get<double>();
    t.signals = j.at("signals").get<std::vector<double>>();
    t.cost = j.at("cost").get<double>();
    t.cost_by_label = j.at("cost_by_label").get<std::vector<double>>();
    for (const auto& v : j.at("verdicts")) t.verdicts.push_back(json_verdict(v));
    return t;
  }
  if (kind == "event") {
    EventRecord e;
    e.type = j.at("type").get<std::string>();
    e.tick = j.at("tick").get<std::size_t>();
    e.t = j.at("t").get<double>();
    e.detail = j.at("detail");
    return e;
  }
  throw FormatError("unknown log record '" + kind + "'");
}

/// One JSON object per line: the header, then records in occurrence order.
inline void write_log(std::ostream& out, const ExecutionLog& log) {
  out << header_json(log.header).dump() << '\n';
  for (const auto& r : log.records) out << record_json(r).dump() << '\n';
}

inline ExecutionLog read_log(std::istream& in) {
  ExecutionLog log;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  try {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line);
      if (!have_header) {
        log.header = json_header(j);
        have_header = true;
      } else {
        log.records.push_back(json_record(j));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("log line " + std::to_string(lineno) + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError("log line " + std::to_string(lineno) + ": " + e.what());
  }
  if (!have_header) throw FormatError("empty log");
  return log;
}

}  // namespace safenav::runtime
