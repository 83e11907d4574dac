#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "safenav/error.hpp"
#include "safenav/grid.hpp"
#include "safenav/log.hpp"
#include "safenav/planner/planner.hpp"
#include "safenav/robot_state.hpp"
#include "safenav/scenario.hpp"
#include "safenav/semantic_map.hpp"
#include "safenav/stl/monitor.hpp"
#include "safenav/tne.hpp"
#include "safenav/traces.hpp"
#include "safenav/world.hpp"

namespace safenav::runtime {

using planner::HardSpec;
using traces::TimedPath;

/// splitmix64 step; used to derive independent seeds from a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline double unit_uniform(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

// ---------------------------------------------------------------------------
// Modes

struct ModeProfile {
  std::string name;
  std::vector<HardSpec> specs;
  semantic::CostVector costs;
  double clearance_margin{1.0};
  double speed_limit_kph{5.0};
};

inline ModeProfile make_profile(const Scenario& sc, const std::string& mode) {
  const ModeConfig& m = sc.mode(mode);
  return {m.name, hard_specs(m), cost_vector(m, sc.world->labels()), m.clearance_margin, m.speed_limit_kph};
}

struct ModeMaps {
  /// Label costs only; used to account path cost.
  semantic::CostMap base;
  /// Base costs with the clearance buffer raised to the obstacle cost; used to plan.
  semantic::CostMap planning;
};

inline ModeMaps mode_cost_map(const WorldModel& world, const ModeProfile& profile,
                              const SegmentationConfig& seg, std::uint64_t seed,
                              double obstacle_cost = semantic::kDefaultObstacleCost) {
  const std::size_t n = world.labels().size();
  const auto confusion = seg.confusion_mass > 0.0 ? semantic::uniform_confusion(n, seg.confusion_mass)
                                                  : semantic::identity_confusion(n);
  const auto tensor = semantic::mock_segmentation(world.label_grid(), confusion, seed, {seg.noise});
  ModeMaps maps;
  maps.base = semantic::build_cost_map(tensor, profile.costs, world.frame().resolution, {profile.name, 0});
  maps.planning =
      semantic::inflate_obstacle_buffer(maps.base, world.obstacle_mask(), profile.clearance_margin, obstacle_cost);
  return maps;
}

// ---------------------------------------------------------------------------
// Dynamics and disturbances

struct Command {
  double speed_kph{0.0};
  double heading{0.0};
};

struct DisturbanceSample {
  double speed_offset_kph{0.0};
  Vec2 position_offset;
};

/// Point-mass step: actual speed = command + offset, floored at 0; the robot
/// moves along the commanded heading at the actual speed.
inline RobotState step_dynamics(const RobotState& s, const Command& cmd, double dt,
                                const DisturbanceSample& d = {}) {
  if (cmd.speed_kph < 0.0) throw Error("commanded speed must be non-negative");
  RobotState next = s;
  next.speed_kph = std::max(0.0, cmd.speed_kph + d.speed_offset_kph);
  next.heading = cmd.heading;
  const double step = next.speed_kph / kKphPerMps * dt;
  next.position = s.position + Vec2{step * std::cos(cmd.heading), step * std::sin(cmd.heading)} + d.position_offset;
  next.t = s.t + dt;
  return next;
}

class DisturbanceModel {
 public:
  DisturbanceModel() = default;
  DisturbanceModel(std::vector<Disturbance> schedule, double jitter_kph, std::uint64_t seed)
      : schedule_(std::move(schedule)), jitter_kph_(jitter_kph), seed_(seed) {}

  /// Offsets applied at `tick`; a pure function of (schedule, seed, tick).
  DisturbanceSample at(std::size_t tick) const {
    DisturbanceSample d;
    for (const auto& s : schedule_) {
      if (static_cast<long long>(tick) < s.first_tick || static_cast<long long>(tick) > s.last_tick) continue;
      d.speed_offset_kph += s.speed_offset_kph;
      d.position_offset = d.position_offset + s.position_offset;
    }
    if (jitter_kph_ > 0.0)
      d.speed_offset_kph += jitter_kph_ * (2.0 * unit_uniform(derive_seed(seed_, tick)) - 1.0);
    return d;
  }

  bool empty() const { return schedule_.empty() && !(jitter_kph_ > 0.0); }

 private:
  std::vector<Disturbance> schedule_;
  double jitter_kph_{0.0};
  std::uint64_t seed_{0};
};

// ---------------------------------------------------------------------------
// Planning from the current state

struct ReplanRequest {
  Vec2 position;
  double t{0.0};
  int pause_ticks{0};
  std::optional<Vec2> previous;
  std::uint64_t planner_seed{1};
};

inline planner::PlanningContext planning_context(const Scenario& sc, const ModeProfile& profile,
                                                 const ReplanRequest& req) {
  planner::PlanningContext ctx;
  ctx.world = sc.world.get();
  ctx.specs = profile.specs;
  ctx.planner = sc.planner;
  ctx.planner.seed = req.planner_seed;
  ctx.timing.speed_limit_kph = profile.speed_limit_kph;
  ctx.timing.speed_fraction = sc.speed_fraction;
  ctx.timing.dt = sc.dt;
  ctx.timing.t0 = req.t;
  ctx.timing.pause_ticks = req.pause_ticks;
  ctx.timing.dwell_s = sc.dwell_s;
  ctx.timing.previous = req.previous;
  ctx.trace = sc.signals;
  ctx.trace.dt = sc.dt;
  ctx.eval = sc.eval;
  return ctx;
}

struct ModeSwitchResult {
  ModeMaps maps;
  planner::CertifiedPlan plan;
};

/// Discards the old maps, rebuilds them for `target` and certifies a plan from
/// the robot's position.
inline ModeSwitchResult switch_mode(const Scenario& sc, const ModeProfile& target, const ReplanRequest& req,
                                    std::uint64_t map_seed) {
  ModeMaps maps = mode_cost_map(*sc.world, target, sc.segmentation, map_seed, sc.planner.obstacle_cost);
  auto plan = planner::certify_plan(maps.planning, req.position, sc.goal, planning_context(sc, target, req));
  return {std::move(maps), std::move(plan)};
}

// ---------------------------------------------------------------------------
// Episodes

struct EpisodeOptions {
  std::uint64_t seed{0};
  /// Overrides the scenario's initial mode when set.
  std::optional<std::string> initial_mode;
};

struct PlanRecord {
  std::size_t tick{0};
  std::string reason;  // initial | violation | mode_switch
  std::string mode;
  TimedPath path;
  planner::ScreeningReport report;
  int rounds{0};
  /// Signal sample one tick before the plan start, when any.
  std::optional<Vec2> previous;
};

struct EpisodeResult {
  ExecutionLog log;
  std::vector<PlanRecord> plans;
  tne::RunMetrics metrics;
  /// Executed trace over the whole episode.
  Trace trace;
  std::string outcome;
};

inline int outcome_exit_code(const std::string& outcome) {
  if (outcome == "infeasible") return 3;
  if (outcome == "violation_terminal") return 4;
  return 0;
}

namespace detail {

struct ActiveMonitor {
  std::string spec;
  stl::OnlineMonitor monitor;
};

inline std::vector<stl::InstantRobustness> shifted(const std::vector<stl::InstantRobustness>& in,
                                                   std::size_t base) {
  std::vector<stl::InstantRobustness> out;
  out.reserve(in.size());
  for (const auto& s : in) out.push_back({base + s.index, s.value});
  return out;
}

/// Integral of the map cost along a -> b, split by true label.
inline double accrued_cost(const WorldModel& world, const semantic::CostMap& c, Vec2 a, Vec2 b,
                           std::vector<double>* by_label = nullptr) {
  const GridFrame& f = world.frame();
  double total = 0.0;
  traverse_segment(f, a, b, [&](Cell cell, double len) {
    if (!f.contains(cell)) return;
    const double piece = c[cell] * len;
    total += piece;
    if (by_label) (*by_label)[static_cast<std::size_t>(world.label_at(cell))] += piece;
  });
  return total;
}

inline nlohmann::json plan_detail(const PlanRecord& p, const WorldModel& world, const semantic::CostMap& c) {
  double cost = 0.0;
  const auto& w = p.path.waypoints();
  for (std::size_t i = 1; i < w.size(); ++i) cost += accrued_cost(world, c, w[i - 1].position(), w[i].position());
  return {{"reason", p.reason},
          {"mode", p.mode},
          {"rounds", p.rounds},
          {"waypoints", p.path.size()},
          {"length", p.path.length()},
          {"end_t", p.path.end_time()},
          {"path_cost", cost}};
}

}  // namespace detail

inline std::uint64_t map_seed(std::uint64_t episode_seed) { return derive_seed(episode_seed, 0x5e6); }
inline std::uint64_t planner_seed(const Scenario& sc, std::uint64_t episode_seed, std::size_t plan_index) {
  return derive_seed(episode_seed ^ sc.planner.seed, plan_index);
}

/// The plan an episode with these options starts from.
inline ModeSwitchResult certify_from_start(const Scenario& sc, const EpisodeOptions& opts = {}) {
  const ModeProfile profile = make_profile(sc, opts.initial_mode.value_or(sc.initial_mode));
  ReplanRequest req{sc.start, 0.0, 0, std::nullopt, planner_seed(sc, opts.seed, 0)};
  return switch_mode(sc, profile, req, map_seed(opts.seed));
}

inline LogHeader make_header(const Scenario& sc, std::uint64_t seed) {
  LogHeader h;
  h.scenario = sc.name;
  h.seed = seed;
  h.dt = sc.dt;
  h.signals = traces::navigation_schema(sc.world->labels()).specs();
  h.labels = sc.world->labels().names();
  h.eq_epsilon = sc.eval.eq_epsilon;
  for (const auto& m : sc.modes) {
    ModeSpecs ms{m.name, {}};
    for (const auto& s : hard_specs(m)) ms.specs.push_back({s.id, s.text});
    h.modes.push_back(std::move(ms));
  }
  h.start.position = sc.start;
  h.start.battery = std::clamp(sc.battery.initial, 0.0, 1.0);
  return h;
}

/// certify -> execute tick by tick -> monitor. A new violation pauses the robot
/// and triggers certification from its position on the next tick; scheduled
/// mode switches pause, discard the old monitors and maps, and certify under
/// the new mode. The plan is followed in plan time, which advances by
/// actual/commanded speed each tick, so an undisturbed run reproduces the
/// screening trace sample for sample.
inline EpisodeResult run_episode(const Scenario& sc, const EpisodeOptions& opts = {}) {
  if (!sc.world) throw ScenarioError(ScenarioErrorKind::Invalid, "scenario has no world");
  const WorldModel& world = *sc.world;
  const double dt = sc.dt;
  traces::TraceOptions topts = sc.signals;
  topts.dt = dt;
  const SignalSchema schema = traces::navigation_schema(world.labels());

  EpisodeResult res;
  res.log.header = make_header(sc, opts.seed);
  res.trace = Trace(schema, dt, 0.0);
  const DisturbanceModel disturbances(sc.disturbances, sc.jitter_kph, derive_seed(opts.seed, 0xd15));

  std::string mode = opts.initial_mode.value_or(sc.initial_mode);
  ModeProfile profile = make_profile(sc, mode);
  ModeMaps maps;
  std::vector<detail::ActiveMonitor> monitors;
  std::size_t monitor_base = 0;
  std::vector<tne::SpecHistory> histories;
  TimedPath path;
  double lag = 0.0;
  Vec2 offset;
  bool pending_violation = false;
  std::size_t plan_count = 0;

  auto event = [&](std::string type, std::size_t tick, nlohmann::json detail) {
    res.log.records.push_back(EventRecord{std::move(type), tick, static_cast<double>(tick) * dt, std::move(detail)});
  };
  auto finish = [&](std::size_t tick, const std::string& outcome) {
    res.outcome = outcome;
    event("end", tick, {{"outcome", outcome}});
  };
  auto start_monitors = [&](std::size_t tick) {
    monitors.clear();
    monitor_base = tick;
    for (const auto& s : profile.specs)
      monitors.push_back({s.id, stl::OnlineMonitor(s.formula, schema, dt, sc.eval)});
  };
  auto close_monitors = [&](std::size_t tick) {
    if (monitors.empty()) return;
    nlohmann::json verdicts = nlohmann::json::array();
    for (auto& m : monitors) {
      const stl::Verdict v = m.monitor.finalize();
      SpecVerdict sv{m.spec, v.status, v.robustness, detail::shifted(m.monitor.settled(), monitor_base)};
      tne::SpecHistory& h = tne::detail::history_for(histories, m.spec);
      h.settled.insert(h.settled.end(), sv.settled.begin(), sv.settled.end());
      tne::detail::record_final(h, v.status, v.robustness);
      verdicts.push_back(verdict_json(sv));
    }
    event("monitor_final", tick, {{"mode", mode}, {"start_tick", monitor_base}, {"verdicts", std::move(verdicts)}});
    monitors.clear();
  };
  auto certify = [&](std::size_t tick, const std::string& reason, Vec2 pos, std::optional<Vec2> previous,
                     bool rebuild_maps) {
    ReplanRequest req{pos, static_cast<double>(tick) * dt, tick == 0 ? 0 : 1, previous,
                      planner_seed(sc, opts.seed, plan_count)};
    planner::CertifiedPlan cp;
    if (rebuild_maps) {
      ModeSwitchResult r = switch_mode(sc, profile, req, map_seed(opts.seed));
      maps = std::move(r.maps);
      cp = std::move(r.plan);
    } else {
      cp = planner::certify_plan(maps.planning, pos, sc.goal, planning_context(sc, profile, req));
    }
    ++plan_count;
    PlanRecord rec{tick, reason, mode, std::move(cp.path), std::move(cp.report), cp.rounds, previous};
    event(reason == "initial" ? "plan" : "replan", tick, detail::plan_detail(rec, world, maps.base));
    path = rec.path;
    res.plans.push_back(std::move(rec));
    lag = 0.0;
    offset = {};
  };

  const auto budget = static_cast<std::size_t>(std::max(0, sc.tick_budget));
  std::optional<Vec2> prev_pos;
  Vec2 pos = sc.start;
  double tau = 0.0;
  double battery = std::clamp(sc.battery.initial, 0.0, 1.0);

  for (std::size_t k = 0; k < budget; ++k) {
    const double t = static_cast<double>(k) * dt;
    battery = std::clamp(sc.battery.initial - sc.battery.drain_per_tick * static_cast<double>(k), 0.0, 1.0);

    // Decisions taken at this tick, before the sample is recorded.
    std::optional<std::pair<std::string, std::string>> switch_to;  // (target, trigger)
    for (const auto& e : sc.mode_switches)
      if (static_cast<std::size_t>(e.tick) == k) switch_to = {e.to, "scheduled"};
    if (!switch_to && sc.battery.auto_trigger && battery <= sc.battery.threshold && mode != sc.battery.to)
      switch_to = {sc.battery.to, "battery"};

    try {
      if (k == 0) {
        certify(0, "initial", pos, std::nullopt, true);
        start_monitors(0);
      } else if (switch_to) {
        close_monitors(k);
        const ModeProfile target = make_profile(sc, switch_to->first);
        // How the plan being executed fares under the incoming rules.
        const auto old = planner::screen_plan(res.plans.back().path, target.specs, world, topts, sc.eval,
                                              res.plans.back().previous);
        event("mode_switch", k,
              {{"from", mode}, {"to", target.name}, {"trigger", switch_to->second},
               {"old_plan", planner::report_to_json(old)}});
        mode = target.name;
        profile = target;
        pending_violation = false;
        certify(k, "mode_switch", pos, prev_pos, true);
        start_monitors(k);
      } else if (pending_violation) {
        pending_violation = false;
        try {
          certify(k, "violation", pos, prev_pos, false);
        } catch (const Error& e) {
          event("infeasible", k, {{"message", e.what()}});
          close_monitors(k);
          finish(k, "violation_terminal");
          break;
        }
      }
    } catch (const planner::InfeasibleError& e) {
      event("infeasible", k, {{"message", e.what()}});
      close_monitors(k);
      finish(k, "infeasible");
      break;
    } catch (const planner::IrreparableError& e) {
      event("infeasible", k, {{"message", e.what()}});
      close_monitors(k);
      finish(k, "infeasible");
      break;
    }

    // A fresh plan starts at this tick in plan time.
    if (!res.plans.empty() && res.plans.back().tick == k) tau = t;

    // Sample k.
    const DisturbanceSample d = disturbances.at(k);
    const double commanded = path.speed_at(tau);
    const double actual = std::max(0.0, commanded + d.speed_offset_kph);
    offset = offset + d.position_offset;
    pos = path.position_at(tau) + offset;
    const GridFrame& f = world.frame();
    pos.x = std::clamp(pos.x, 0.0, std::nextafter(f.width_m(), 0.0));
    pos.y = std::clamp(pos.y, 0.0, std::nextafter(f.height_m(), 0.0));

    RobotState state{pos, actual, path.heading_at(tau), battery, t};
    traces::append_execution_sample(res.trace, state, world, topts);

    TickRecord rec;
    rec.tick = k;
    rec.t = t;
    rec.mode = mode;
    rec.state = state;
    rec.commanded_kph = commanded;
    rec.signals = res.trace.sample(k).values;
    rec.cost_by_label.assign(world.labels().size(), 0.0);
    if (prev_pos) rec.cost = detail::accrued_cost(world, maps.base, *prev_pos, pos, &rec.cost_by_label);

    std::vector<std::string> violated;
    double worst = stl::kCap;
    for (auto& m : monitors) {
      const stl::Verdict v = m.monitor.step(res.trace.sample(k));
      SpecVerdict sv{m.spec, v.status, v.robustness, detail::shifted(m.monitor.settled(), monitor_base)};
      tne::SpecHistory& h = tne::detail::history_for(histories, m.spec);
      h.settled.insert(h.settled.end(), sv.settled.begin(), sv.settled.end());
      if (m.monitor.new_violations() > 0) {
        violated.push_back(m.spec);
        worst = std::min(worst, v.robustness);
      }
      rec.verdicts.push_back(std::move(sv));
    }
    res.log.records.push_back(std::move(rec));
    if (!violated.empty()) {
      event("violation", k, {{"specs", violated}, {"robustness", worst}});
      pending_violation = true;
    }

    if (tau >= path.end_time() - 1e-9) {
      event("goal_reached", k, {{"x", pos.x}, {"y", pos.y}});
      close_monitors(k);
      finish(k, "goal_reached");
      break;
    }

    // Plan time advances by the fraction of the commanded motion achieved.
    if (actual != commanded && commanded > 0.0) lag += dt * (actual / commanded - 1.0);
    prev_pos = pos;
    tau = t + dt + lag;
  }

  if (res.outcome.empty()) {
    if (budget > 0) {
      close_monitors(budget - 1);
      finish(budget - 1, "budget_exhausted");
    } else {
      res.outcome = "budget_exhausted";
    }
  }

  tne::RunTotals totals = tne::detail::totals_of(res.log);
  res.metrics = tne::run_metrics(histories, totals);
  return res;
}

}  // namespace safenav::runtime
