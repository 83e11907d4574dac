#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "safenav/planner/graph.hpp"
#include "safenav/robot_state.hpp"
#include "safenav/stl/formula.hpp"
#include "safenav/stl/robustness.hpp"
#include "safenav/traces.hpp"
#include "safenav/world.hpp"

namespace safenav::planner {

using traces::TimedPath;
using traces::Waypoint;

struct TimingOptions {
  double speed_limit_kph{5.0};
  double speed_fraction{0.9};
  double dt{0.5};
  double t0{0.0};
  /// Ticks spent stationary at the first waypoint before moving.
  int pause_ticks{0};
  /// Required stationary time at a stop zone; the dwell lasts this plus one tick.
  double dwell_s{3.0};
  /// Stop-zone dwells are inserted only when a world is given.
  const WorldModel* world{nullptr};
  /// Position one tick before the path start, when known.
  std::optional<Vec2> previous;
  /// Tick grid used to align stop-zone arrivals; defaults to t0.
  std::optional<double> grid_origin;
  /// Grid the final arrival snaps to; defaults to the tick grid.
  std::optional<double> end_origin;

  double command_kph() const { return speed_fraction * speed_limit_kph; }
};

namespace detail {

inline double align_up(double t, double origin, double dt) {
  return origin + std::ceil((t - origin) / dt - 1e-9) * dt;
}

inline int zone_of(const WorldModel& w, Vec2 p) {
  const Cell c = w.frame().cell_of(p);
  return w.frame().contains(c) ? w.zone_at(c) : -1;
}

}  // namespace detail

/// Assigns times to a polyline at the commanded speed. Entering a stop zone
/// inserts an arrival on the tick grid followed by a dwell; the path ends with
/// a wait at the goal up to the next tick.
inline TimedPath time_path(const std::vector<Vec2>& pts, const TimingOptions& opts) {
  if (pts.empty()) throw TraceError("cannot time an empty path");
  if (!(opts.command_kph() > 0.0)) throw TraceError("commanded speed must be positive");
  const double v = opts.command_kph() / kKphPerMps;
  const double origin = opts.grid_origin.value_or(opts.t0);
  const double end_origin = opts.end_origin.value_or(origin);
  const double dwell = opts.dwell_s + opts.dt;
  std::vector<Waypoint> wp;
  double t = opts.t0;
  wp.push_back({pts[0].x, pts[0].y, t});
  if (opts.pause_ticks > 0) {
    t += opts.pause_ticks * opts.dt;
    wp.push_back({pts[0].x, pts[0].y, t});
  }

  int zone = -1;
  if (opts.world) {
    const int z0 = detail::zone_of(*opts.world, pts[0]);
    const bool entered_before = opts.previous && detail::zone_of(*opts.world, *opts.previous) == z0;
    if (z0 >= 0 && !entered_before) {
      // The first sample already counts as arriving; it must sit on the grid.
      t = detail::align_up(t, origin, opts.dt);
      if (t > wp.back().t) wp.push_back({pts[0].x, pts[0].y, t});
      t += dwell;
      wp.push_back({pts[0].x, pts[0].y, t});
    }
    zone = z0;
  }

  for (std::size_t i = 1; i < pts.size(); ++i) {
    const Vec2 a = pts[i - 1], b = pts[i];
    const double len = distance(a, b);
    if (len == 0.0) continue;
    // Distances along a->b at which a new stop zone is entered.
    std::vector<double> entries;
    if (opts.world) {
      double s = 0.0;
      traverse_segment(opts.world->frame(), a, b, [&](Cell cell, double piece) {
        const int z = opts.world->frame().contains(cell) ? opts.world->zone_at(cell) : -1;
        if (z >= 0 && z != zone && s > 0.0) entries.push_back(s);
        zone = z;
        s += piece;
      });
    }
    double done = 0.0;
    Vec2 from = a;
    for (double s : entries) {
      const double at = std::min(len, s + 1e-6);
      const Vec2 q = a + (at / len) * (b - a);
      t = detail::align_up(t + (at - done) / v, origin, opts.dt);
      wp.push_back({q.x, q.y, t});
      t += dwell;
      wp.push_back({q.x, q.y, t});
      from = q;
      done = at;
    }
    if (len - done > 0.0) {
      t += distance(from, b) / v;
      wp.push_back({b.x, b.y, t});
    }
  }
  if (wp.size() > 1) {
    // Wait at the goal until the next tick rather than slowing the last leg.
    const double snapped = detail::align_up(wp.back().t, end_origin, opts.dt);
    if (snapped - wp.back().t > 1e-9) wp.push_back({wp.back().x, wp.back().y, snapped});
    else if (snapped > wp[wp.size() - 2].t) wp.back().t = snapped;
  }
  return TimedPath(std::move(wp));
}

inline TimedPath plan(const semantic::CostMap& c, Vec2 start, Vec2 goal, const PlannerConfig& cfg,
                      const TimingOptions& timing) {
  return time_path(plan_positions(c, start, goal, cfg), timing);
}

// ---------------------------------------------------------------------------
// Screening

struct HardSpec {
  std::string id;
  std::string text;
  stl::Formula formula;
  double threshold{0.0};
};

struct SpecResult {
  std::string id;
  double robustness{0.0};
  stl::Status status{stl::Status::Inconclusive};
  double threshold{0.0};
};

struct ViolatingSegment {
  std::string spec_id;
  std::size_t first{0};  // sample indices, inclusive
  std::size_t last{0};
};

struct ScreeningReport {
  std::vector<SpecResult> results;
  std::vector<ViolatingSegment> segments;
  bool accepted{true};
  double t0{0.0};
  double dt{0.5};
  std::size_t samples{0};

  const SpecResult* find(const std::string& id) const {
    for (const auto& r : results)
      if (r.id == id) return &r;
    return nullptr;
  }
};

namespace detail {

/// Sample intervals responsible for a failed spec: for G-shaped rules, every
/// instant whose body falls below the threshold together with the samples its
/// body window reads; otherwise the whole trace.
inline std::vector<std::pair<std::size_t, std::size_t>> localize(const stl::Formula& f,
                                                                const Trace& trace,
                                                                double threshold,
                                                                const stl::EvalOptions& eval) {
  const std::size_t n = trace.size();
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (f.kind != stl::Kind::Globally) return {{0, n - 1}};
  auto h = stl::horizon_samples(f.child(), trace.dt());
  if (!h) return {{0, n - 1}};
  const stl::SampleWindow w = stl::to_samples(f.interval, trace.dt());
  const auto body = stl::robustness_signal(f.child(), trace, eval);
  const std::size_t stop = w.open ? n - 1 : std::min(n - 1, w.last);
  for (std::size_t k = w.first; k <= stop && k < n; ++k) {
    if (!(body[k] < threshold)) continue;
    const std::size_t last = std::min(n - 1, k + *h);
    if (!out.empty() && k <= out.back().second + 1) out.back().second = std::max(out.back().second, last);
    else out.push_back({k, last});
  }
  if (out.empty()) out.push_back({0, n - 1});
  return out;
}

}  // namespace detail

inline ScreeningReport screen_trace(const Trace& trace, const std::vector<HardSpec>& specs,
                                    const stl::EvalOptions& eval = {}) {
  ScreeningReport r;
  r.t0 = trace.t0();
  r.dt = trace.dt();
  r.samples = trace.size();
  for (const auto& spec : specs) {
    const stl::Verdict v = stl::evaluate_offline(spec.formula, trace, eval);
    r.results.push_back({spec.id, v.robustness, v.status, spec.threshold});
    if (v.robustness < spec.threshold) {
      r.accepted = false;
      for (auto [a, b] : detail::localize(spec.formula, trace, spec.threshold, eval))
        r.segments.push_back({spec.id, a, b});
    }
  }
  return r;
}

inline ScreeningReport screen_plan(const TimedPath& path, const std::vector<HardSpec>& specs,
                                   const WorldModel& world, const traces::TraceOptions& topts = {},
                                   const stl::EvalOptions& eval = {},
                                   std::optional<Vec2> previous = std::nullopt) {
  return screen_trace(traces::derive_trace(path, world, topts, previous), specs, eval);
}

inline nlohmann::json report_to_json(const ScreeningReport& r) {
  nlohmann::json j;
  j["schema"] = "safenav.screening/1";
  j["accepted"] = r.accepted;
  j["t0"] = r.t0;
  j["dt"] = r.dt;
  j["samples"] = r.samples;
  j["specs"] = nlohmann::json::array();
  for (const auto& s : r.results)
    j["specs"].push_back({{"id", s.id},
                          {"robustness", s.robustness},
                          {"verdict", stl::status_name(s.status)},
                          {"threshold", s.threshold}});
  j["violations"] = nlohmann::json::array();
  for (const auto& s : r.segments)
    j["violations"].push_back({{"spec", s.spec_id},
                               {"first", s.first},
                               {"last", s.last},
                               {"t_first", r.t0 + static_cast<double>(s.first) * r.dt},
                               {"t_last", r.t0 + static_cast<double>(s.last) * r.dt}});
  return j;
}

// ---------------------------------------------------------------------------
// Repair and certification

struct PlanningContext {
  const WorldModel* world{nullptr};
  std::vector<HardSpec> specs;
  PlannerConfig planner;
  TimingOptions timing;
  traces::TraceOptions trace;
  stl::EvalOptions eval;

  TimingOptions timing_for_world() const {
    TimingOptions t = timing;
    t.world = world;
    t.dt = trace.dt;
    return t;
  }
  ScreeningReport screen(const TimedPath& path) const {
    return screen_plan(path, specs, *world, trace, eval, timing.previous);
  }
};

struct RepairResult {
  TimedPath path;
  ScreeningReport report;
  semantic::CostMap cost_map;
  /// Waypoint indices (into the input path) bounding the replaced stretch; the
  /// anchors themselves keep their coordinates.
  std::size_t window_first{0};
  std::size_t window_last{0};
  int escalations{0};
  bool full_replan{false};
};

/// Cells visited by the trace inside the violating intervals, grown by
/// `dilation` cells into neighbours carrying the same label.
inline std::vector<Cell> violating_cells(const Trace& trace, const ScreeningReport& report,
                                         const WorldModel& world, int dilation) {
  std::set<Cell> cells;
  const GridFrame& f = world.frame();
  for (const auto& seg : report.segments) {
    for (std::size_t k = seg.first; k <= seg.last && k < trace.size(); ++k) {
      const Cell c = f.cell_of({trace.value(traces::kColX, k), trace.value(traces::kColY, k)});
      if (!f.contains(c)) continue;
      const int label = world.label_at(c);
      for (int dr = -dilation; dr <= dilation; ++dr)
        for (int dc = -dilation; dc <= dilation; ++dc) {
          const Cell n{c.row + dr, c.col + dc};
          if (f.contains(n) && world.label_at(n) == label) cells.insert(n);
        }
    }
  }
  return {cells.begin(), cells.end()};
}

namespace detail {

inline std::pair<std::size_t, std::size_t> initial_window(const TimedPath& path,
                                                          const ScreeningReport& report) {
  std::size_t s0 = report.samples, s1 = 0;
  for (const auto& seg : report.segments) {
    s0 = std::min(s0, seg.first);
    s1 = std::max(s1, seg.last);
  }
  const double ta = report.t0 + static_cast<double>(s0) * report.dt;
  const double tb = report.t0 + static_cast<double>(s1) * report.dt;
  const auto& w = path.waypoints();
  std::size_t i0 = 0, i1 = w.size() - 1;
  for (std::size_t i = 0; i < w.size(); ++i)
    if (w[i].t <= ta + 1e-9) i0 = i;
  for (std::size_t i = w.size(); i-- > 0;)
    if (w[i].t >= tb - 1e-9) i1 = i;
  if (i1 <= i0) i1 = std::min(w.size() - 1, i0 + 1);
  if (i1 <= i0 && i0 > 0) i0 = i1 - 1;
  return {i0, i1};
}

inline Box window_box(const TimedPath& path, std::size_t i0, std::size_t i1, double margin,
                      const GridFrame& f) {
  Box b{path[i0].x, path[i0].y, path[i0].x, path[i0].y};
  for (std::size_t i = i0; i <= i1; ++i) {
    b.x0 = std::min(b.x0, path[i].x);
    b.y0 = std::min(b.y0, path[i].y);
    b.x1 = std::max(b.x1, path[i].x);
    b.y1 = std::max(b.y1, path[i].y);
  }
  b.x0 = std::max(0.0, b.x0 - margin);
  b.y0 = std::max(0.0, b.y0 - margin);
  b.x1 = std::min(f.width_m(), b.x1 + margin);
  b.y1 = std::min(f.height_m(), b.y1 + margin);
  return b;
}

/// Replaces waypoints strictly between i0 and i1 with a re-planned stretch.
/// Waypoints up to i0 keep their times; waypoints from i1 on keep their
/// coordinates and shift in time by a whole number of ticks.
inline TimedPath splice(const TimedPath& path, std::size_t i0, std::size_t i1,
                        const std::vector<Vec2>& stretch, const PlanningContext& ctx) {
  const auto& w = path.waypoints();
  TimingOptions t = ctx.timing_for_world();
  t.t0 = w[i0].t;
  t.pause_ticks = 0;
  t.grid_origin = ctx.timing.grid_origin.value_or(ctx.timing.t0);
  t.end_origin = w[i1].t;
  t.previous = i0 > 0 ? std::optional<Vec2>(w[i0 - 1].position()) : ctx.timing.previous;
  // A dwell that starts at the left anchor is part of the prefix; keep it.
  std::size_t keep = i0;
  while (keep + 1 < i1 && w[keep + 1].x == w[i0].x && w[keep + 1].y == w[i0].y) ++keep;
  if (keep != i0) {
    t.t0 = w[keep].t;
    t.previous = w[i0].position();
  }
  const TimedPath mid = time_path(stretch, t);
  std::vector<Waypoint> out(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(keep));
  for (std::size_t k = 0; k < mid.size(); ++k) {
    Waypoint m = mid[k];
    if (k == 0) m = w[keep];
    if (k + 1 == mid.size()) {
      m.x = w[i1].x;
      m.y = w[i1].y;
    }
    out.push_back(m);
  }
  const double shift = out.back().t - w[i1].t;
  for (std::size_t i = i1 + 1; i < w.size(); ++i) out.push_back({w[i].x, w[i].y, w[i].t + shift});
  return TimedPath(std::move(out));
}

}  // namespace detail

/// Re-weights the cells behind the violations, then re-plans the offending
/// stretch between preserved anchors, growing the window by the configured
/// factor after each failure and finally re-planning the whole path.
/// Throws IrreparableError when even the full re-plan finds no path.
inline RepairResult repair_plan(const TimedPath& path, const ScreeningReport& report,
                                const semantic::CostMap& c, const PlanningContext& ctx) {
  RepairResult out{path, report, c, 0, path.size() - 1, 0, false};
  if (report.accepted) return out;
  const PlannerConfig& cfg = ctx.planner;
  cfg.validate();
  const Trace trace = traces::derive_trace(path, *ctx.world, ctx.trace, ctx.timing.previous);
  out.cost_map = semantic::reweight_region(
      c, violating_cells(trace, report, *ctx.world, cfg.reweight_dilation), cfg.reweight_factor);
  const semantic::CostMap& cm = out.cost_map;

  auto [i0, i1] = detail::initial_window(path, report);
  const std::size_t n = path.size();
  for (int e = 0; e <= cfg.max_escalations; ++e) {
    if (e > 0) {
      const std::size_t width = i1 - i0;
      const auto grow = static_cast<std::size_t>(
          std::ceil((cfg.repair_growth - 1.0) * static_cast<double>(width) / 2.0));
      i0 = i0 > grow ? i0 - grow : 0;
      i1 = std::min(n - 1, i1 + grow);
    }
    PlannerConfig local = cfg;
    local.seed = cfg.seed + 7919ULL * static_cast<std::uint64_t>(e + 1);
    const Box box = detail::window_box(path, i0, i1, cfg.repair_margin * (e + 1), cm.frame());
    try {
      auto stretch = plan_positions(cm, path[i0].position(), path[i1].position(), local, box);
      TimedPath candidate = detail::splice(path, i0, i1, stretch, ctx);
      ScreeningReport r = ctx.screen(candidate);
      if (r.accepted) {
        out.path = std::move(candidate);
        out.report = std::move(r);
        out.window_first = i0;
        out.window_last = i1;
        out.escalations = e;
        return out;
      }
    } catch (const InfeasibleError&) {
    } catch (const TraceError&) {
    }
    if (i0 == 0 && i1 == n - 1) break;
  }

  PlannerConfig full = cfg;
  full.seed = cfg.seed + 104729ULL;
  std::vector<Vec2> pts;
  try {
    pts = plan_positions(cm, path.front().position(), path.back().position(), full);
  } catch (const InfeasibleError& err) {
    throw IrreparableError(std::string("repair failed; full re-plan infeasible: ") + err.what());
  }
  out.path = time_path(pts, ctx.timing_for_world());
  out.report = ctx.screen(out.path);
  out.window_first = 0;
  out.window_last = n - 1;
  out.escalations = cfg.max_escalations;
  out.full_replan = true;
  return out;
}

struct CertifiedPlan {
  TimedPath path;
  ScreeningReport report;
  semantic::CostMap cost_map;
  int rounds{0};
};

/// plan -> screen -> (re-weight + repair -> screen)* until every hard spec is met.
inline CertifiedPlan certify_plan(const semantic::CostMap& c, Vec2 start, Vec2 goal,
                                  const PlanningContext& ctx) {
  if (!ctx.world) throw Error("certify_plan needs a world model");
  ctx.planner.validate();
  TimedPath path = time_path(plan_positions(c, start, goal, ctx.planner), ctx.timing_for_world());
  ScreeningReport report = ctx.screen(path);
  semantic::CostMap cm = c;
  int round = 0;
  while (!report.accepted && round < ctx.planner.max_certify_rounds) {
    PlanningContext next = ctx;
    next.planner.seed = ctx.planner.seed + 15485863ULL * static_cast<std::uint64_t>(round + 1);
    RepairResult r = repair_plan(path, report, cm, next);
    path = std::move(r.path);
    report = std::move(r.report);
    cm = std::move(r.cost_map);
    ++round;
  }
  if (!report.accepted)
    throw IrreparableError("no candidate satisfied every hard rule after " + std::to_string(round) +
                           " repair rounds");
  return {std::move(path), std::move(report), std::move(cm), round};
}

}  // namespace safenav::planner
