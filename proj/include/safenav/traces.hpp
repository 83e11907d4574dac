#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "safenav/error.hpp"
#include "safenav/grid.hpp"
#include "safenav/robot_state.hpp"
#include "safenav/signals.hpp"
#include "safenav/world.hpp"

namespace safenav::traces {

struct Waypoint {
  double x{0.0};
  double y{0.0};
  double t{0.0};
  Vec2 position() const { return {x, y}; }
  friend bool operator==(const Waypoint&, const Waypoint&) = default;
};

/// Timed polyline. Repeating a position with a later time encodes a dwell.
class TimedPath {
 public:
  TimedPath() = default;
  explicit TimedPath(std::vector<Waypoint> waypoints) : wp_(std::move(waypoints)) { validate(); }

  const std::vector<Waypoint>& waypoints() const { return wp_; }
  std::size_t size() const { return wp_.size(); }
  bool empty() const { return wp_.empty(); }
  const Waypoint& operator[](std::size_t i) const { return wp_[i]; }
  const Waypoint& front() const { return wp_.front(); }
  const Waypoint& back() const { return wp_.back(); }
  double start_time() const { return wp_.front().t; }
  double end_time() const { return wp_.back().t; }

  /// Index of the segment active at time t: the last waypoint with t_i <= t,
  /// capped so the final waypoint reports its incoming segment.
  std::size_t segment_at(double t) const {
    if (wp_.size() < 2) return 0;
    auto it = std::upper_bound(wp_.begin(), wp_.end(), t,
                               [](double v, const Waypoint& w) { return v < w.t; });
    std::size_t i = it == wp_.begin() ? 0 : static_cast<std::size_t>(it - wp_.begin()) - 1;
    return std::min(i, wp_.size() - 2);
  }

  Vec2 position_at(double t) const {
    if (wp_.size() == 1 || t <= wp_.front().t) return wp_.front().position();
    if (t >= wp_.back().t) return wp_.back().position();
    const std::size_t i = segment_at(t);
    const Waypoint& a = wp_[i];
    const Waypoint& b = wp_[i + 1];
    const double u = (t - a.t) / (b.t - a.t);
    return {a.x + u * (b.x - a.x), a.y + u * (b.y - a.y)};
  }

  double segment_speed_kph(std::size_t i) const {
    const Waypoint& a = wp_[i];
    const Waypoint& b = wp_[i + 1];
    return distance(a.position(), b.position()) / (b.t - a.t) * kKphPerMps;
  }

  double speed_at(double t) const {
    if (wp_.size() < 2) return 0.0;
    return segment_speed_kph(segment_at(t));
  }

  double heading_at(double t) const {
    if (wp_.size() < 2) return 0.0;
    const std::size_t i = segment_at(t);
    const Vec2 d = wp_[i + 1].position() - wp_[i].position();
    return d.norm() > 0.0 ? std::atan2(d.y, d.x) : 0.0;
  }

  double length() const {
    double len = 0.0;
    for (std::size_t i = 1; i < wp_.size(); ++i) len += distance(wp_[i - 1].position(), wp_[i].position());
    return len;
  }

  friend bool operator==(const TimedPath&, const TimedPath&) = default;

 private:
  void validate() const {
    for (std::size_t i = 1; i < wp_.size(); ++i)
      if (!(wp_[i].t > wp_[i - 1].t)) throw TraceError("waypoint times must strictly increase");
    for (const auto& w : wp_)
      if (!std::isfinite(w.x) || !std::isfinite(w.y) || !std::isfinite(w.t))
        throw TraceError("waypoints must be finite");
  }

  std::vector<Waypoint> wp_;
};

struct TraceOptions {
  double dt{0.5};
  /// `slow` holds while speed < this (kph).
  double slow_threshold_kph{5.0};
  /// `stop` holds while |speed| <= this (kph).
  double stop_epsilon_kph{0.05};
  /// Stop signs are observed within this range (m).
  double stop_sign_radius{5.0};

  friend bool operator==(const TraceOptions&, const TraceOptions&) = default;
};

/// Signals carried by every navigation trace, in column order.
inline SignalSchema navigation_schema(const semantic::LabelSet& labels) {
  SignalSchema s;
  s.add({"x", SignalKind::Real, "m"});
  s.add({"y", SignalKind::Real, "m"});
  s.add({"speed", SignalKind::Real, "kph"});
  s.add({"dist_o", SignalKind::Real, "m"});
  s.add({"slow", SignalKind::Boolean, ""});
  s.add({"stop", SignalKind::Boolean, ""});
  s.add({"stop_obs", SignalKind::Boolean, ""});
  s.add({"at_stop", SignalKind::Boolean, ""});
  for (const auto& name : labels.names()) s.add({"status_" + name, SignalKind::Boolean, ""});
  return s;
}

inline constexpr std::size_t kColX = 0, kColY = 1, kColSpeed = 2, kColDist = 3, kColSlow = 4,
                             kColStop = 5, kColStopObs = 6, kColAtStop = 7, kColStatus = 8;

/// Signal values for the robot at `pos` moving at `speed_kph`. Stop-sign
/// observation and stop-zone arrival are entry events: they hold on the first
/// sample inside the detection radius / zone, judged against `previous`.
inline std::vector<double> derive_sample(const WorldModel& world, Vec2 pos, double speed_kph,
                                         std::optional<Vec2> previous, const TraceOptions& opts) {
  const Cell cell = world.frame().checked_cell(pos);
  std::vector<double> v(kColStatus + world.labels().size(), -1.0);
  v[kColX] = pos.x;
  v[kColY] = pos.y;
  v[kColSpeed] = speed_kph;
  v[kColDist] = world.distance()[cell];
  v[kColSlow] = encode_bool(speed_kph < opts.slow_threshold_kph);
  v[kColStop] = encode_bool(std::abs(speed_kph) <= opts.stop_epsilon_kph);

  bool sign_entry = false;
  for (Vec2 sign : world.stop_signs()) {
    const bool inside = distance(pos, sign) <= opts.stop_sign_radius;
    const bool was_inside = previous && distance(*previous, sign) <= opts.stop_sign_radius;
    sign_entry = sign_entry || (inside && !was_inside);
  }
  v[kColStopObs] = encode_bool(sign_entry);

  const int zone = world.zone_at(cell);
  bool zone_entry = false;
  if (zone >= 0) {
    zone_entry = true;
    if (previous) {
      const Cell prev = world.frame().cell_of(*previous);
      zone_entry = !(world.frame().contains(prev) && world.zone_at(prev) == zone);
    }
  }
  v[kColAtStop] = encode_bool(zone_entry);
  v[kColStatus + static_cast<std::size_t>(world.label_at(cell))] = 1.0;
  return v;
}

/// Samples a timed path every dt from its start time through its end time.
/// `previous` is the position one tick before the path start, when known.
inline Trace derive_trace(const TimedPath& path, const WorldModel& world, const TraceOptions& opts,
                          std::optional<Vec2> previous = std::nullopt) {
  if (path.empty()) throw TraceError("cannot derive a trace from an empty path");
  Trace trace(navigation_schema(world.labels()), opts.dt, path.start_time());
  const double span = path.end_time() - path.start_time();
  const auto ticks = static_cast<std::size_t>(std::floor(span / opts.dt + 1e-9));
  for (std::size_t k = 0; k <= ticks; ++k) {
    const double t = trace.time(k);
    const Vec2 pos = path.position_at(t);
    if (!world.frame().contains(pos)) throw OutOfBoundsError("path leaves the world");
    trace.push_back(derive_sample(world, pos, path.speed_at(t), previous, opts));
    previous = pos;
  }
  return trace;
}

/// Extends an execution trace by one tick from the observed robot state.
inline void append_execution_sample(Trace& trace, const RobotState& state, const WorldModel& world,
                                    const TraceOptions& opts) {
  const double expected = trace.time(trace.size());
  if (std::abs(state.t - expected) > 1e-9 * std::max(1.0, std::abs(state.t)))
    throw TraceError("execution sample at t=" + std::to_string(state.t) + " but next tick is t=" +
                     std::to_string(expected));
  std::optional<Vec2> previous;
  if (!trace.empty()) {
    const std::size_t k = trace.size() - 1;
    previous = Vec2{trace.value(kColX, k), trace.value(kColY, k)};
  }
  trace.push_back(derive_sample(world, state.position, state.speed_kph, previous, opts));
}

// ---------------------------------------------------------------------------
// CSV

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw FormatError("bad number '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) {
    while (!cur.empty() && (cur.back() == '\r' || cur.back() == ' ')) cur.pop_back();
    out.push_back(cur);
  }
  return out;
}

/// `t,<signal>...`, one row per tick, booleans as +1/-1, shortest round-trip reals.
inline void write_trace_csv(std::ostream& out, const Trace& trace) {
  out << "t";
  for (const auto& s : trace.schema().specs()) out << ',' << s.name;
  out << '\n';
  for (std::size_t k = 0; k < trace.size(); ++k) {
    out << format_double(trace.time(k));
    for (std::size_t i = 0; i < trace.schema().size(); ++i) {
      const double v = trace.value(i, k);
      out << ',';
      if (trace.schema()[i].kind == SignalKind::Boolean) out << (v > 0 ? "+1" : "-1");
      else out << format_double(v);
    }
    out << '\n';
  }
}

/// Guesses kind and unit from the conventional navigation signal names.
inline SignalSpec infer_signal(const std::string& name) {
  if (name == "speed") return {name, SignalKind::Real, "kph"};
  if (name == "dist_o" || name == "x" || name == "y") return {name, SignalKind::Real, "m"};
  if (name == "slow" || name == "stop" || name == "stop_obs" || name == "at_stop" ||
      name.rfind("status_", 0) == 0)
    return {name, SignalKind::Boolean, ""};
  return {name, SignalKind::Real, ""};
}

/// Reads a trace CSV. Without `schema`, signal kinds are inferred from names;
/// without `dt`, the spacing of the first two rows is used.
inline Trace read_trace_csv(std::istream& in, const SignalSchema* schema = nullptr,
                            std::optional<double> dt = std::nullopt) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty trace file");
  auto header = split_csv(line);
  if (header.empty() || header[0] != "t") throw FormatError("trace header must start with 't'");
  SignalSchema s;
  for (std::size_t i = 1; i < header.size(); ++i) s.add(infer_signal(header[i]));
  if (schema) {
    if (schema->size() != s.size()) throw FormatError("trace columns do not match the schema");
    for (std::size_t i = 0; i < s.size(); ++i)
      if ((*schema)[i].name != s[i].name) throw FormatError("trace columns do not match the schema");
    s = *schema;
  }
  std::vector<std::vector<double>> rows;
  std::vector<double> times;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv(line);
    if (cells.size() != header.size()) throw FormatError("trace row has the wrong width");
    times.push_back(parse_double(cells[0]));
    std::vector<double> row;
    for (std::size_t i = 1; i < cells.size(); ++i) row.push_back(parse_double(cells[i]));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError("trace has no rows");
  double step = dt ? *dt : (rows.size() > 1 ? times[1] - times[0] : 1.0);
  Trace trace(s, step, times[0]);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (std::abs(times[k] - trace.time(k)) > 1e-9 * std::max(1.0, std::abs(times[k])))
      throw FormatError("trace timestamps are not uniform");
    trace.push_back(rows[k]);
  }
  return trace;
}

inline void write_path_csv(std::ostream& out, const TimedPath& path) {
  out << "x,y,t\n";
  for (const auto& w : path.waypoints())
    out << format_double(w.x) << ',' << format_double(w.y) << ',' << format_double(w.t) << '\n';
}

inline TimedPath read_path_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty path file");
  auto header = split_csv(line);
  if (header != std::vector<std::string>{"x", "y", "t"}) throw FormatError("path header must be x,y,t");
  std::vector<Waypoint> wp;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv(line);
    if (cells.size() != 3) throw FormatError("path row must have three fields");
    wp.push_back({parse_double(cells[0]), parse_double(cells[1]), parse_double(cells[2])});
  }
  if (wp.empty()) throw FormatError("path has no waypoints");
  return TimedPath(std::move(wp));
}

}  // namespace safenav::traces
