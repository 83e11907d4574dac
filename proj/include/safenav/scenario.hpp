#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <tuple>
#include <string>
#include <vector>

#include "json.hpp"

#include "safenav/error.hpp"
#include "safenav/planner/planner.hpp"
#include "safenav/semantic_map.hpp"
#include "safenav/stl/parser.hpp"
#include "safenav/traces.hpp"
#include "safenav/world.hpp"

namespace safenav {

enum class ScenarioErrorKind { Parse, UnknownLabel, MissingCost, BadSpec, Invalid, Io };

inline const char* scenario_error_name(ScenarioErrorKind k) {
  switch (k) {
    case ScenarioErrorKind::Parse: return "parse";
    case ScenarioErrorKind::UnknownLabel: return "unknown-label";
    case ScenarioErrorKind::MissingCost: return "missing-cost";
    case ScenarioErrorKind::BadSpec: return "bad-spec";
    case ScenarioErrorKind::Invalid: return "invalid";
    case ScenarioErrorKind::Io: return "io";
  }
  return "?";
}

class ScenarioError : public Error {
 public:
  ScenarioError(ScenarioErrorKind kind, const std::string& msg)
      : Error(std::string(scenario_error_name(kind)) + ": " + msg), kind_(kind) {}
  ScenarioErrorKind kind() const { return kind_; }

 private:
  ScenarioErrorKind kind_;
};

struct RuleEntry {
  std::string id;
  std::string description;
  std::string spec;
  double threshold{0.0};
  bool enabled{true};
  stl::Formula formula;  // filled by validation

  friend bool operator==(const RuleEntry&, const RuleEntry&) = default;
};

/// Soft preference: realized only through the cost vector.
struct Preference {
  std::string id;
  std::string description;
  std::string prefer;
  std::string over;

  friend bool operator==(const Preference&, const Preference&) = default;
};

struct ModeConfig {
  std::string name;
  std::map<std::string, double> costs;
  double clearance_margin{1.0};
  double speed_limit_kph{5.0};
  std::vector<RuleEntry> rules;
  std::vector<Preference> preferences;
  /// Labelled variants that ship disabled unless `enabled` is set.
  std::vector<RuleEntry> alternatives;

  friend bool operator==(const ModeConfig&, const ModeConfig&) = default;
};

struct ModeSwitchEvent {
  int tick{0};
  std::string to;
  friend bool operator==(const ModeSwitchEvent&, const ModeSwitchEvent&) = default;
};

struct Disturbance {
  int first_tick{0};
  int last_tick{0};
  double speed_offset_kph{0.0};
  Vec2 position_offset;
  friend bool operator==(const Disturbance&, const Disturbance&) = default;
};

struct BatteryConfig {
  double initial{1.0};
  double drain_per_tick{0.0};
  bool auto_trigger{false};
  double threshold{0.2};
  std::string to{"low_battery"};
  friend bool operator==(const BatteryConfig&, const BatteryConfig&) = default;
};

struct SegmentationConfig {
  double confusion_mass{0.0};
  double noise{0.0};
  friend bool operator==(const SegmentationConfig&, const SegmentationConfig&) = default;
};

struct Scenario {
  int version{1};
  std::string name;
  std::string world_file;
  std::shared_ptr<const WorldModel> world;
  double dt{0.5};
  Vec2 start;
  Vec2 goal;
  std::string initial_mode{"normal"};
  std::vector<ModeConfig> modes;
  std::vector<ModeSwitchEvent> mode_switches;
  std::vector<Disturbance> disturbances;
  double jitter_kph{0.0};
  int trials{1};
  std::uint64_t seed{0};
  int tick_budget{2000};
  planner::PlannerConfig planner;
  double speed_fraction{0.9};
  double dwell_s{3.0};
  SegmentationConfig segmentation;
  BatteryConfig battery;
  traces::TraceOptions signals;
  stl::EvalOptions eval;

  const ModeConfig* find_mode(const std::string& n) const {
    for (const auto& m : modes)
      if (m.name == n) return &m;
    return nullptr;
  }
  const ModeConfig& mode(const std::string& n) const {
    const ModeConfig* m = find_mode(n);
    if (!m) throw ScenarioError(ScenarioErrorKind::Invalid, "unknown mode '" + n + "'");
    return *m;
  }

  /// The world is compared by content, not identity.
  friend bool operator==(const Scenario& a, const Scenario& b) {
    auto tie = [](const Scenario& s) {
      return std::tie(s.version, s.name, s.world_file, s.dt, s.start, s.goal, s.initial_mode,
                      s.modes, s.mode_switches, s.disturbances, s.jitter_kph, s.trials, s.seed,
                      s.tick_budget, s.planner, s.speed_fraction, s.dwell_s, s.segmentation,
                      s.battery, s.signals, s.eval);
    };
    if (tie(a) != tie(b)) return false;
    if (!a.world || !b.world) return a.world == b.world;
    return world_to_json(*a.world) == world_to_json(*b.world);
  }
};

/// Hard specs of a mode with ids qualified by the mode name ("normal/rule1").
inline std::vector<planner::HardSpec> hard_specs(const ModeConfig& m) {
  std::vector<planner::HardSpec> out;
  auto add = [&](const RuleEntry& r) {
    if (r.enabled) out.push_back({m.name + "/" + r.id, r.spec, r.formula, r.threshold});
  };
  for (const auto& r : m.rules) add(r);
  for (const auto& r : m.alternatives) add(r);
  return out;
}

inline semantic::CostVector cost_vector(const ModeConfig& m, const semantic::LabelSet& labels) {
  std::vector<double> c;
  for (const auto& name : labels.names()) {
    auto it = m.costs.find(name);
    if (it == m.costs.end())
      throw ScenarioError(ScenarioErrorKind::MissingCost,
                          "mode '" + m.name + "' has no cost for label '" + name + "'");
    c.push_back(it->second);
  }
  return semantic::CostVector(std::move(c));
}

namespace detail {

inline std::vector<double> vec2_json(Vec2 v) { return {v.x, v.y}; }

inline Vec2 json_vec2(const nlohmann::json& j) {
  auto v = j.get<std::vector<double>>();
  if (v.size() != 2) throw ScenarioError(ScenarioErrorKind::Invalid, "expected an [x, y] pair");
  return {v[0], v[1]};
}

inline RuleEntry rule_from_json(const nlohmann::json& j, bool default_enabled) {
  RuleEntry r;
  r.id = j.at("id").get<std::string>();
  r.description = j.value("description", "");
  r.spec = j.at("spec").get<std::string>();
  r.threshold = j.value("threshold", 0.0);
  r.enabled = j.value("enabled", default_enabled);
  return r;
}

inline nlohmann::json rule_to_json(const RuleEntry& r) {
  return {{"id", r.id},
          {"description", r.description},
          {"spec", r.spec},
          {"threshold", r.threshold},
          {"enabled", r.enabled}};
}

inline std::string line_col(const std::string& text, std::size_t offset) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace detail

/// Structural decoding only; cross-references are checked by validate_scenario.
inline Scenario scenario_from_json(const nlohmann::json& j) {
  try {
    Scenario s;
    s.version = j.value("version", 1);
    s.name = j.value("name", "");
    s.world_file = j.at("world").get<std::string>();
    s.dt = j.value("dt", 0.5);
    s.start = detail::json_vec2(j.at("start"));
    s.goal = detail::json_vec2(j.at("goal"));
    s.initial_mode = j.value("initial_mode", "normal");
    for (const auto& mj : j.at("modes")) {
      ModeConfig m;
      m.name = mj.at("name").get<std::string>();
      m.costs = mj.at("costs").get<std::map<std::string, double>>();
      m.clearance_margin = mj.at("clearance_margin").get<double>();
      m.speed_limit_kph = mj.at("speed_limit_kph").get<double>();
      for (const auto& r : mj.value("rules", nlohmann::json::array()))
        m.rules.push_back(detail::rule_from_json(r, true));
      for (const auto& r : mj.value("alternatives", nlohmann::json::array()))
        m.alternatives.push_back(detail::rule_from_json(r, false));
      for (const auto& p : mj.value("preferences", nlohmann::json::array()))
        m.preferences.push_back({p.at("id").get<std::string>(), p.value("description", ""),
                                 p.at("prefer").get<std::string>(), p.at("over").get<std::string>()});
      s.modes.push_back(std::move(m));
    }
    for (const auto& e : j.value("events", nlohmann::json::array())) {
      const auto type = e.at("type").get<std::string>();
      if (type != "mode_switch")
        throw ScenarioError(ScenarioErrorKind::Invalid, "unknown event type '" + type + "'");
      s.mode_switches.push_back({e.at("tick").get<int>(), e.at("to").get<std::string>()});
    }
    for (const auto& d : j.value("disturbances", nlohmann::json::array())) {
      Disturbance dist;
      dist.first_tick = d.at("first_tick").get<int>();
      dist.last_tick = d.value("last_tick", dist.first_tick);
      dist.speed_offset_kph = d.value("speed_offset_kph", 0.0);
      if (d.contains("position_offset")) dist.position_offset = detail::json_vec2(d["position_offset"]);
      s.disturbances.push_back(dist);
    }
    s.jitter_kph = j.value("jitter_kph", 0.0);
    s.trials = j.value("trials", 1);
    s.seed = j.value("seed", std::uint64_t{0});
    s.tick_budget = j.value("tick_budget", 2000);
    s.speed_fraction = j.value("speed_fraction", 0.9);
    s.dwell_s = j.value("dwell_s", 3.0);
    if (j.contains("planner")) {
      const auto& p = j["planner"];
      auto& c = s.planner;
      c.max_iterations = p.value("max_iterations", c.max_iterations);
      c.step_size = p.value("step_size", c.step_size);
      c.goal_bias = p.value("goal_bias", c.goal_bias);
      c.length_weight = p.value("length_weight", c.length_weight);
      c.seed = p.value("seed", c.seed);
      c.repair_growth = p.value("repair_growth", c.repair_growth);
      c.max_escalations = p.value("max_escalations", c.max_escalations);
      c.rewire_radius = p.value("rewire_radius", c.rewire_radius);
      c.obstacle_cost = p.value("obstacle_cost", c.obstacle_cost);
      c.reweight_factor = p.value("reweight_factor", c.reweight_factor);
      c.reweight_dilation = p.value("reweight_dilation", c.reweight_dilation);
      c.max_certify_rounds = p.value("max_certify_rounds", c.max_certify_rounds);
      c.update_iterations = p.value("update_iterations", c.update_iterations);
      c.repair_margin = p.value("repair_margin", c.repair_margin);
    }
    if (j.contains("segmentation")) {
      s.segmentation.confusion_mass = j["segmentation"].value("confusion_mass", 0.0);
      s.segmentation.noise = j["segmentation"].value("noise", 0.0);
    }
    if (j.contains("battery")) {
      const auto& b = j["battery"];
      s.battery.initial = b.value("initial", 1.0);
      s.battery.drain_per_tick = b.value("drain_per_tick", 0.0);
      s.battery.auto_trigger = b.value("auto_trigger", false);
      s.battery.threshold = b.value("threshold", 0.2);
      s.battery.to = b.value("to", std::string("low_battery"));
    }
    if (j.contains("signals")) {
      const auto& g = j["signals"];
      s.signals.slow_threshold_kph = g.value("slow_threshold_kph", 5.0);
      s.signals.stop_epsilon_kph = g.value("stop_epsilon_kph", 0.05);
      s.signals.stop_sign_radius = g.value("stop_sign_radius", 5.0);
      s.eval.eq_epsilon = g.value("eq_epsilon", 0.05);
    }
    s.signals.dt = s.dt;
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(ScenarioErrorKind::Invalid, std::string("malformed scenario: ") + e.what());
  }
}

inline nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json j;
  j["version"] = s.version;
  j["name"] = s.name;
  j["world"] = s.world_file;
  j["dt"] = s.dt;
  j["start"] = detail::vec2_json(s.start);
  j["goal"] = detail::vec2_json(s.goal);
  j["initial_mode"] = s.initial_mode;
  j["modes"] = nlohmann::json::array();
  for (const auto& m : s.modes) {
    nlohmann::json mj;
    mj["name"] = m.name;
    mj["costs"] = m.costs;
    mj["clearance_margin"] = m.clearance_margin;
    mj["speed_limit_kph"] = m.speed_limit_kph;
    mj["rules"] = nlohmann::json::array();
    for (const auto& r : m.rules) mj["rules"].push_back(detail::rule_to_json(r));
    mj["alternatives"] = nlohmann::json::array();
    for (const auto& r : m.alternatives) mj["alternatives"].push_back(detail::rule_to_json(r));
    mj["preferences"] = nlohmann::json::array();
    for (const auto& p : m.preferences)
      mj["preferences"].push_back(
          {{"id", p.id}, {"description", p.description}, {"prefer", p.prefer}, {"over", p.over}});
    j["modes"].push_back(std::move(mj));
  }
  j["events"] = nlohmann::json::array();
  for (const auto& e : s.mode_switches)
    j["events"].push_back({{"type", "mode_switch"}, {"tick", e.tick}, {"to", e.to}});
  j["disturbances"] = nlohmann::json::array();
  for (const auto& d : s.disturbances)
    j["disturbances"].push_back({{"first_tick", d.first_tick},
                                 {"last_tick", d.last_tick},
                                 {"speed_offset_kph", d.speed_offset_kph},
                                 {"position_offset", detail::vec2_json(d.position_offset)}});
  j["jitter_kph"] = s.jitter_kph;
  j["trials"] = s.trials;
  j["seed"] = s.seed;
  j["tick_budget"] = s.tick_budget;
  j["speed_fraction"] = s.speed_fraction;
  j["dwell_s"] = s.dwell_s;
  const auto& c = s.planner;
  j["planner"] = {{"max_iterations", c.max_iterations},
                  {"step_size", c.step_size},
                  {"goal_bias", c.goal_bias},
                  {"length_weight", c.length_weight},
                  {"seed", c.seed},
                  {"repair_growth", c.repair_growth},
                  {"max_escalations", c.max_escalations},
                  {"rewire_radius", c.rewire_radius},
                  {"obstacle_cost", c.obstacle_cost},
                  {"reweight_factor", c.reweight_factor},
                  {"reweight_dilation", c.reweight_dilation},
                  {"max_certify_rounds", c.max_certify_rounds},
                  {"update_iterations", c.update_iterations},
                  {"repair_margin", c.repair_margin}};
  j["segmentation"] = {{"confusion_mass", s.segmentation.confusion_mass},
                       {"noise", s.segmentation.noise}};
  j["battery"] = {{"initial", s.battery.initial},
                  {"drain_per_tick", s.battery.drain_per_tick},
                  {"auto_trigger", s.battery.auto_trigger},
                  {"threshold", s.battery.threshold},
                  {"to", s.battery.to}};
  j["signals"] = {{"slow_threshold_kph", s.signals.slow_threshold_kph},
                  {"stop_epsilon_kph", s.signals.stop_epsilon_kph},
                  {"stop_sign_radius", s.signals.stop_sign_radius},
                  {"eq_epsilon", s.eval.eq_epsilon}};
  return j;
}

/// Resolves cross-references against the world and parses every rule.
inline void validate_scenario(Scenario& s) {
  using K = ScenarioErrorKind;
  if (!s.world) throw ScenarioError(K::Invalid, "scenario has no world");
  const WorldModel& w = *s.world;
  if (!(s.dt > 0.0)) throw ScenarioError(K::Invalid, "dt must be positive");
  if (s.trials < 1) throw ScenarioError(K::Invalid, "trial count must be at least 1");
  if (s.tick_budget < 0) throw ScenarioError(K::Invalid, "tick budget must be non-negative");
  if (!(s.speed_fraction > 0.0 && s.speed_fraction <= 1.0))
    throw ScenarioError(K::Invalid, "speed fraction must lie in (0, 1]");
  if (!(s.dwell_s >= 0.0)) throw ScenarioError(K::Invalid, "dwell must be non-negative");
  if (!w.frame().contains(s.start)) throw ScenarioError(K::Invalid, "start lies outside the world");
  if (!w.frame().contains(s.goal)) throw ScenarioError(K::Invalid, "goal lies outside the world");
  try {
    s.planner.validate();
  } catch (const Error& e) {
    throw ScenarioError(K::Invalid, e.what());
  }
  if (s.modes.empty()) throw ScenarioError(K::Invalid, "scenario declares no modes");
  std::set<std::string> names;
  for (const auto& m : s.modes)
    if (!names.insert(m.name).second)
      throw ScenarioError(K::Invalid, "duplicate mode '" + m.name + "'");
  if (!names.count(s.initial_mode))
    throw ScenarioError(K::Invalid, "initial mode '" + s.initial_mode + "' is not declared");
  for (const auto& e : s.mode_switches) {
    if (!names.count(e.to)) throw ScenarioError(K::Invalid, "event targets unknown mode '" + e.to + "'");
    if (e.tick < 0) throw ScenarioError(K::Invalid, "event tick must be non-negative");
  }
  if (s.battery.auto_trigger && !names.count(s.battery.to))
    throw ScenarioError(K::Invalid, "battery trigger targets unknown mode '" + s.battery.to + "'");
  for (const auto& d : s.disturbances)
    if (d.first_tick < 0 || d.last_tick < d.first_tick)
      throw ScenarioError(K::Invalid, "disturbance tick interval is malformed");

  const SignalSchema schema = traces::navigation_schema(w.labels());
  for (auto& m : s.modes) {
    for (const auto& [label, cost] : m.costs) {
      if (!w.labels().find(label))
        throw ScenarioError(K::UnknownLabel, "mode '" + m.name + "' prices unknown label '" + label + "'");
      if (!(cost >= 0.0)) throw ScenarioError(K::Invalid, "label costs must be non-negative");
    }
    for (const auto& label : w.labels().names())
      if (!m.costs.count(label))
        throw ScenarioError(K::MissingCost, "mode '" + m.name + "' has no cost for label '" + label + "'");
    if (!(m.clearance_margin >= 0.0)) throw ScenarioError(K::Invalid, "clearance margin must be >= 0");
    if (!(m.speed_limit_kph > 0.0)) throw ScenarioError(K::Invalid, "speed limit must be positive");
    for (const auto& p : m.preferences)
      for (const auto& label : {p.prefer, p.over})
        if (!w.labels().find(label))
          throw ScenarioError(K::UnknownLabel, "preference '" + p.id + "' names unknown label '" + label + "'");
    std::set<std::string> ids;
    auto parse = [&](RuleEntry& r) {
      if (!ids.insert(r.id).second)
        throw ScenarioError(K::Invalid, "duplicate rule id '" + r.id + "' in mode '" + m.name + "'");
      try {
        r.formula = stl::parse_formula(r.spec, schema);
      } catch (const stl::ParseError& e) {
        if (e.kind() == stl::ParseErrorKind::UnknownSignal && e.subject().rfind("status_", 0) == 0)
          throw ScenarioError(K::UnknownLabel, "rule '" + r.id + "' refers to label '" +
                                                   e.subject().substr(7) + "' absent from the world");
        throw ScenarioError(K::BadSpec, "rule '" + r.id + "': " + e.what());
      }
    };
    for (auto& r : m.rules) parse(r);
    for (auto& r : m.alternatives) parse(r);
  }
  const ModeConfig* normal = s.find_mode("normal");
  const ModeConfig* low = s.find_mode("low_battery");
  if (normal && low &&
      (low->clearance_margin < normal->clearance_margin || low->speed_limit_kph > normal->speed_limit_kph))
    throw ScenarioError(K::Invalid, "low_battery must be at least as strict as normal");
  s.signals.dt = s.dt;
}

/// Parses scenario text. Relative world paths resolve against `base_dir`.
inline Scenario parse_scenario(const std::string& text, const std::filesystem::path& base_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioError(ScenarioErrorKind::Parse,
                        detail::line_col(text, e.byte > 0 ? e.byte - 1 : 0) + ": " + e.what());
  }
  Scenario s = scenario_from_json(j);
  std::filesystem::path wp = s.world_file;
  if (wp.is_relative()) wp = base_dir / wp;
  try {
    s.world = std::make_shared<const WorldModel>(load_world(wp));
  } catch (const IoError& e) {
    throw ScenarioError(ScenarioErrorKind::Io, e.what());
  } catch (const Error& e) {
    throw ScenarioError(ScenarioErrorKind::Invalid, std::string("world: ") + e.what());
  }
  validate_scenario(s);
  return s;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError(ScenarioErrorKind::Io, "cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path.parent_path());
}

}  // namespace safenav
