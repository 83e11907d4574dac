#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <vector>

#include "safenav/signals.hpp"
#include "safenav/stl/formula.hpp"
#include "safenav/stl/robustness.hpp"

namespace safenav::stl {

/// Robustness bounds over a prefix whose continuation is unknown.
struct RobustnessInterval {
  double lo{-kCap};
  double hi{kCap};
};

namespace detail {

/// Interval semantics: every sample past the end of `prefix` may take any value,
/// so windows reaching past the end only constrain one side of the bound.
inline std::vector<RobustnessInterval> interval_signal(const Formula& f, const Trace& prefix,
                                                       const EvalOptions& opts) {
  const std::size_t n = prefix.size();
  std::vector<RobustnessInterval> out(n);
  switch (f.kind) {
    case Kind::True:
      for (auto& r : out) r = {kCap, kCap};
      return out;
    case Kind::False:
      for (auto& r : out) r = {-kCap, -kCap};
      return out;
    case Kind::Predicate: {
      const auto& col = prefix.column(signal_index(prefix, f.pred.signal));
      for (std::size_t t = 0; t < n; ++t) {
        double v = predicate_margin(f.pred, col[t], opts);
        out[t] = {v, v};
      }
      return out;
    }
    case Kind::Not: {
      auto c = interval_signal(f.child(), prefix, opts);
      for (std::size_t t = 0; t < n; ++t) out[t] = {-c[t].hi, -c[t].lo};
      return out;
    }
    case Kind::And:
    case Kind::Or:
    case Kind::Implies: {
      auto a = interval_signal(f.child(0), prefix, opts);
      auto b = interval_signal(f.child(1), prefix, opts);
      for (std::size_t t = 0; t < n; ++t) {
        if (f.kind == Kind::Implies) a[t] = {-a[t].hi, -a[t].lo};
        if (f.kind == Kind::And)
          out[t] = {std::min(a[t].lo, b[t].lo), std::min(a[t].hi, b[t].hi)};
        else
          out[t] = {std::max(a[t].lo, b[t].lo), std::max(a[t].hi, b[t].hi)};
      }
      return out;
    }
    case Kind::Globally:
    case Kind::Eventually: {
      auto c = interval_signal(f.child(), prefix, opts);
      std::vector<double> lo(n), hi(n);
      for (std::size_t t = 0; t < n; ++t) {
        lo[t] = c[t].lo;
        hi[t] = c[t].hi;
      }
      const SampleWindow w = to_samples(f.interval, prefix.dt());
      const bool g = f.kind == Kind::Globally;
      auto lo_r = g ? sliding_min(lo, w) : sliding_max(lo, w);
      auto hi_r = g ? sliding_min(hi, w) : sliding_max(hi, w);
      for (std::size_t t = 0; t < n; ++t) {
        const bool reaches_future = w.open || t + w.last > n - 1;
        out[t] = {lo_r[t], hi_r[t]};
        if (reaches_future) {
          if (g) out[t].lo = -kCap;
          else out[t].hi = kCap;
        }
      }
      return out;
    }
    case Kind::Until: {
      auto l = interval_signal(f.child(0), prefix, opts);
      auto r = interval_signal(f.child(1), prefix, opts);
      const SampleWindow w = to_samples(f.interval, prefix.dt());
      for (std::size_t t = 0; t < n; ++t) {
        RobustnessInterval best{-kCap, -kCap};
        RobustnessInterval left_min{kCap, kCap};
        const std::size_t stop = w.open ? n - 1 : std::min(n - 1, t + w.last);
        for (std::size_t tp = t; tp <= stop; ++tp) {
          if (tp >= t + w.first) {
            best.lo = std::max(best.lo, std::min(r[tp].lo, left_min.lo));
            best.hi = std::max(best.hi, std::min(r[tp].hi, left_min.hi));
          }
          left_min.lo = std::min(left_min.lo, l[tp].lo);
          left_min.hi = std::min(left_min.hi, l[tp].hi);
        }
        if (w.open || t + w.last > n - 1) {
          // Some witness instant lies in the unknown future.
          best.hi = std::max(best.hi, left_min.hi);
        }
        out[t] = best;
      }
      return out;
    }
  }
  return out;
}

}  // namespace detail

enum class MonitorErrorKind { NonMonotoneTime, DtMismatch, Finalized, Schema };

class MonitorError : public Error {
 public:
  MonitorError(MonitorErrorKind kind, const std::string& msg) : Error(msg), kind_(kind) {}
  MonitorErrorKind kind() const { return kind_; }

 private:
  MonitorErrorKind kind_;
};

/// Robustness of the obligation checked at one instant. For G[a,inf)(body) this is
/// the robustness of `body` at sample `index`; otherwise the running robustness.
struct InstantRobustness {
  std::size_t index{0};
  double value{0.0};
};

/// Incremental three-valued monitor over a uniformly sampled stream.
///
/// Formulas of the form G[a,inf)(body) with a bounded-horizon body are monitored
/// with a ring of horizon+1 samples; anything else keeps the whole prefix.
class OnlineMonitor {
 public:
  OnlineMonitor(Formula formula, SignalSchema schema, double dt, EvalOptions opts = {})
      : formula_(std::move(formula)), schema_(std::move(schema)), dt_(dt), opts_(opts),
        prefix_(schema_, dt) {
    for (const auto& s : signals_of(formula_))
      if (!schema_.contains(s))
        throw MonitorError(MonitorErrorKind::Schema, "monitor schema lacks signal '" + s + "'");
    if (formula_.kind == Kind::Globally && !formula_.interval.bounded()) {
      if (auto h = horizon_samples(formula_.child(), dt)) {
        safety_ = true;
        body_horizon_ = *h;
        first_instant_ = to_samples(formula_.interval, dt).first;
      }
    }
  }

  const Formula& formula() const { return formula_; }
  bool safety_shaped() const { return safety_; }
  std::size_t sample_count() const { return count_; }
  bool finalized() const { return finalized_; }
  const Verdict& verdict() const { return verdict_; }
  /// Samples currently retained.
  std::size_t buffered() const { return safety_ ? ring_.size() : prefix_.size(); }
  /// Obligations settled by the most recent step() / finalize().
  const std::vector<InstantRobustness>& settled() const { return settled_; }
  /// Violations first detected by the most recent step() / finalize().
  std::size_t new_violations() const { return new_violations_; }

  Verdict step(const Sample& s) {
    if (finalized_) throw MonitorError(MonitorErrorKind::Finalized, "monitor already finalized");
    check_time(s.t);
    if (s.values.size() != schema_.size())
      throw MonitorError(MonitorErrorKind::Schema, "sample width does not match schema");
    last_t_ = s.t;
    ++count_;
    settled_.clear();
    new_violations_ = 0;
    if (safety_) step_safety(s);
    else step_generic(s);
    return verdict_;
  }

  /// Closes the stream: pending obligations are settled with finite-trace
  /// semantics, which makes the verdict agree with evaluate_offline on the prefix.
  Verdict finalize() {
    if (finalized_) return verdict_;
    finalized_ = true;
    settled_.clear();
    new_violations_ = 0;
    if (count_ == 0) return verdict_;
    if (safety_) {
      Trace window = ring_trace();
      auto body = robustness_signal(formula_.child(), window, opts_);
      for (std::size_t b = 0; b < body.size(); ++b) {
        const std::size_t global = ring_start_ + b;
        if (global < first_instant_) continue;
        settle(global, body[b]);
      }
      verdict_.robustness = settled_min_;
      if (settled_min_ < 0.0) mark_violated();
      else verdict_.status = Status::Inconclusive;
    } else {
      Verdict v = evaluate_offline(formula_, prefix_, opts_);
      if (v.status == Status::Violated && verdict_.status != Status::Violated) ++new_violations_;
      if (verdict_.status == Status::Violated) v.decided_at = verdict_.decided_at;
      verdict_ = v;
      settled_.push_back({count_ - 1, v.robustness});
    }
    return verdict_;
  }

 private:
  void check_time(double t) {
    if (count_ == 0) return;
    const double expected = last_t_ + dt_;
    if (t <= last_t_) throw MonitorError(MonitorErrorKind::NonMonotoneTime, "non-monotone sample time");
    if (std::abs(t - expected) > 1e-9 * std::max(1.0, std::abs(t)))
      throw MonitorError(MonitorErrorKind::DtMismatch, "sample spacing differs from dt");
  }

  Trace ring_trace() const {
    Trace tr(schema_, dt_, 0.0);
    for (const auto& v : ring_) tr.push_back(v);
    return tr;
  }

  void mark_violated() {
    if (verdict_.status != Status::Violated) verdict_.decided_at = last_t_;
    verdict_.status = Status::Violated;
  }

  void settle(std::size_t global, double value) {
    settled_.push_back({global, value});
    settled_min_ = std::min(settled_min_, value);
    if (value < 0.0 && !is_flagged(global)) {
      flag(global);
      ++new_violations_;
    }
  }

  bool is_flagged(std::size_t global) const {
    return std::find(flagged_.begin(), flagged_.end(), global) != flagged_.end();
  }
  void flag(std::size_t global) {
    flagged_.push_back(global);
    ++violation_total_;
  }

  void step_safety(const Sample& s) {
    ring_.push_back(s.values);
    const std::size_t n = count_;
    Trace window = ring_trace();
    auto body = detail::interval_signal(formula_.child(), window, opts_);

    // Oldest buffered instant has its whole window available once n > horizon.
    if (n > body_horizon_) {
      const std::size_t global = n - 1 - body_horizon_;
      if (global >= first_instant_) settle(global, body[global - ring_start_].hi);
    }
    double running = settled_min_;
    for (std::size_t b = 0; b < body.size(); ++b) {
      const std::size_t global = ring_start_ + b;
      if (global < first_instant_ || (n > body_horizon_ && global <= n - 1 - body_horizon_))
        continue;
      running = std::min(running, body[b].hi);
      if (body[b].hi < 0.0 && !is_flagged(global)) {
        flag(global);
        ++new_violations_;
      }
    }
    if (n > body_horizon_) {
      ring_.pop_front();
      ++ring_start_;
    }
    // Flags older than the ring are settled and no longer needed.
    std::erase_if(flagged_, [&](std::size_t g) { return g < ring_start_; });

    verdict_.robustness = running;
    if (violation_total_ > 0) mark_violated();
    else verdict_.status = Status::Inconclusive;
  }

  void step_generic(const Sample& s) {
    prefix_.push_back(s.values);
    auto root = detail::interval_signal(formula_, prefix_, opts_)[0];
    if (verdict_.status != Status::Violated && verdict_.status != Status::Satisfied) {
      if (root.hi < 0.0) {
        mark_violated();
        ++new_violations_;
        ++violation_total_;
      } else if (root.lo >= 0.0) {
        verdict_.status = Status::Satisfied;
        verdict_.decided_at = last_t_;
      }
    }
    verdict_.robustness = verdict_.status == Status::Satisfied ? root.lo : root.hi;
    settled_.push_back({count_ - 1, verdict_.robustness});
  }

  Formula formula_;
  SignalSchema schema_;
  double dt_;
  EvalOptions opts_;

  bool safety_{false};
  std::size_t body_horizon_{0};
  std::size_t first_instant_{0};

  std::deque<std::vector<double>> ring_;
  std::size_t ring_start_{0};
  std::vector<std::size_t> flagged_;
  std::size_t violation_total_{0};
  double settled_min_{kCap};

  Trace prefix_;  // generic formulas only

  std::size_t count_{0};
  double last_t_{0.0};
  bool finalized_{false};
  Verdict verdict_{};
  std::vector<InstantRobustness> settled_;
  std::size_t new_violations_{0};
};

}  // namespace safenav::stl
