#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "safenav/error.hpp"
#include "safenav/signals.hpp"
#include "safenav/stl/formula.hpp"

namespace safenav::stl {

class EvalError : public Error {
 public:
  using Error::Error;
};

struct EvalOptions {
  /// Half-width of the band used by `name == x` predicates (same unit as the signal).
  double eq_epsilon{0.05};

  friend bool operator==(const EvalOptions&, const EvalOptions&) = default;
};

enum class Status { Satisfied, Violated, Inconclusive };

inline const char* status_name(Status s) {
  switch (s) {
    case Status::Satisfied: return "satisfied";
    case Status::Violated: return "violated";
    case Status::Inconclusive: return "inconclusive";
  }
  return "";
}

struct Verdict {
  Status status{Status::Inconclusive};
  double robustness{kCap};
  std::optional<double> decided_at;
};

/// Sample-index window [first, last] of a time interval; last is SIZE_MAX when open.
struct SampleWindow {
  std::size_t first{0};
  std::size_t last{0};
  bool open{false};
  bool empty() const { return !open && first > last; }
};

inline SampleWindow to_samples(const Interval& i, double dt) {
  SampleWindow w;
  w.first = static_cast<std::size_t>(std::ceil(i.lo / dt - 1e-9));
  if (i.bounded()) {
    w.last = static_cast<std::size_t>(std::floor(i.hi / dt + 1e-9));
  } else {
    w.open = true;
    w.last = std::numeric_limits<std::size_t>::max();
  }
  return w;
}

/// Future reach in samples; nullopt when some window is open-ended.
inline std::optional<std::size_t> horizon_samples(const Formula& f, double dt) {
  std::size_t h = 0;
  for (const auto& c : f.children) {
    auto hc = horizon_samples(c, dt);
    if (!hc) return std::nullopt;
    h = std::max(h, *hc);
  }
  if (f.temporal()) {
    SampleWindow w = to_samples(f.interval, dt);
    if (w.open) return std::nullopt;
    h += w.last;
  }
  return h;
}

inline double predicate_margin(const Predicate& p, double v, const EvalOptions& opts) {
  switch (p.op) {
    case Comparator::Lt:
    case Comparator::Le: return clamp_robustness(p.threshold - v);
    case Comparator::Gt:
    case Comparator::Ge: return clamp_robustness(v - p.threshold);
    case Comparator::Eq: return clamp_robustness(opts.eq_epsilon - std::abs(v - p.threshold));
    case Comparator::Bool: return clamp_robustness(v);
  }
  return 0.0;
}

inline bool predicate_holds(const Predicate& p, double v, const EvalOptions& opts) {
  switch (p.op) {
    case Comparator::Lt: return v < p.threshold;
    case Comparator::Le: return v <= p.threshold;
    case Comparator::Gt: return v > p.threshold;
    case Comparator::Ge: return v >= p.threshold;
    case Comparator::Eq: return std::abs(v - p.threshold) <= opts.eq_epsilon;
    case Comparator::Bool: return v > 0.0;
  }
  return false;
}

namespace detail {

/// out[t] = reduce(in[t+first .. min(t+last, n-1)]), or `empty_value` when that
/// range is empty. Monotone deque, O(n).
template <typename Better>
std::vector<double> sliding_reduce(const std::vector<double>& in, SampleWindow w,
                                   double empty_value, Better better) {
  const std::size_t n = in.size();
  std::vector<double> out(n, empty_value);
  if (n == 0 || w.empty()) return out;
  std::deque<std::size_t> dq;  // indices increase front->back; the best value sits at the back
  std::size_t next_add = n;    // all indices >= next_add have been offered
  for (std::size_t t = n; t-- > 0;) {
    if (t + w.first > n - 1) continue;
    const std::size_t lo = t + w.first;
    const std::size_t hi = w.open ? n - 1 : std::min(n - 1, t + w.last);
    while (next_add > lo) {
      --next_add;
      if (next_add > hi) continue;
      while (!dq.empty() && !better(in[dq.front()], in[next_add])) dq.pop_front();
      dq.push_front(next_add);
    }
    while (!dq.empty() && dq.back() > hi) dq.pop_back();
    if (!dq.empty()) out[t] = in[dq.back()];
  }
  return out;
}

inline std::vector<double> sliding_min(const std::vector<double>& in, SampleWindow w) {
  return sliding_reduce(in, w, kCap, [](double a, double b) { return a < b; });
}
inline std::vector<double> sliding_max(const std::vector<double>& in, SampleWindow w) {
  return sliding_reduce(in, w, -kCap, [](double a, double b) { return a > b; });
}

inline std::vector<double> until_signal(const std::vector<double>& left,
                                        const std::vector<double>& right, SampleWindow w) {
  const std::size_t n = left.size();
  std::vector<double> out(n, -kCap);
  for (std::size_t t = 0; t < n; ++t) {
    double best = -kCap;
    double left_min = kCap;  // min of left over [t, t')
    const std::size_t stop = w.open ? n - 1 : std::min(n - 1, t + w.last);
    for (std::size_t tp = t; tp <= stop; ++tp) {
      if (tp >= t + w.first) best = std::max(best, std::min(right[tp], left_min));
      left_min = std::min(left_min, left[tp]);
    }
    out[t] = best;
  }
  return out;
}

inline std::size_t signal_index(const Trace& trace, const std::string& name) {
  auto idx = trace.schema().find(name);
  if (!idx) throw EvalError("trace is missing signal '" + name + "'");
  return *idx;
}

}  // namespace detail

/// Robustness of `f` at every sample of the trace (finite-trace semantics:
/// windows are cut at the last sample).
inline std::vector<double> robustness_signal(const Formula& f, const Trace& trace,
                                             const EvalOptions& opts = {}) {
  const std::size_t n = trace.size();
  switch (f.kind) {
    case Kind::True: return std::vector<double>(n, kCap);
    case Kind::False: return std::vector<double>(n, -kCap);
    case Kind::Predicate: {
      const auto& col = trace.column(detail::signal_index(trace, f.pred.signal));
      std::vector<double> out(n);
      for (std::size_t t = 0; t < n; ++t) out[t] = predicate_margin(f.pred, col[t], opts);
      return out;
    }
    case Kind::Not: {
      auto v = robustness_signal(f.child(), trace, opts);
      for (auto& x : v) x = -x;
      return v;
    }
    case Kind::And:
    case Kind::Or:
    case Kind::Implies: {
      auto a = robustness_signal(f.child(0), trace, opts);
      auto b = robustness_signal(f.child(1), trace, opts);
      for (std::size_t t = 0; t < n; ++t) {
        if (f.kind == Kind::And) a[t] = std::min(a[t], b[t]);
        else if (f.kind == Kind::Or) a[t] = std::max(a[t], b[t]);
        else a[t] = std::max(-a[t], b[t]);
      }
      return a;
    }
    case Kind::Globally:
      return detail::sliding_min(robustness_signal(f.child(), trace, opts),
                                 to_samples(f.interval, trace.dt()));
    case Kind::Eventually:
      return detail::sliding_max(robustness_signal(f.child(), trace, opts),
                                 to_samples(f.interval, trace.dt()));
    case Kind::Until:
      return detail::until_signal(robustness_signal(f.child(0), trace, opts),
                                  robustness_signal(f.child(1), trace, opts),
                                  to_samples(f.interval, trace.dt()));
  }
  return {};
}

inline double robustness_at(const Formula& f, const Trace& trace, std::size_t t,
                            const EvalOptions& opts = {}) {
  if (t >= trace.size()) throw EvalError("sample index out of range");
  for (const auto& s : signals_of(f)) detail::signal_index(trace, s);
  return robustness_signal(f, trace, opts)[t];
}

/// True when evaluating `f` at sample t reaches past the end of the trace.
inline bool truncated_at(const Formula& f, const Trace& trace, std::size_t t) {
  auto h = horizon_samples(f, trace.dt());
  return !h || t + *h > trace.size() - 1;
}

/// Whole-trace verdict at sample 0. A non-negative value whose evaluation was cut
/// short by the end of the trace is only tentative and reported Inconclusive.
inline Verdict evaluate_offline(const Formula& f, const Trace& trace,
                                const EvalOptions& opts = {}) {
  if (trace.empty()) throw TraceError("cannot evaluate over an empty trace");
  Verdict v;
  v.robustness = robustness_at(f, trace, 0, opts);
  const double end = trace.time(trace.size() - 1);
  if (v.robustness < 0.0) {
    v.status = Status::Violated;
    v.decided_at = end;
  } else if (truncated_at(f, trace, 0)) {
    v.status = Status::Inconclusive;
  } else {
    v.status = Status::Satisfied;
    v.decided_at = end;
  }
  return v;
}

/// Classical two-valued satisfaction with the same truncation convention.
inline bool boolean_eval(const Formula& f, const Trace& trace, std::size_t t,
                         const EvalOptions& opts = {}) {
  if (t >= trace.size()) throw EvalError("sample index out of range");
  const std::size_t n = trace.size();
  switch (f.kind) {
    case Kind::True: return true;
    case Kind::False: return false;
    case Kind::Predicate:
      return predicate_holds(f.pred, trace.value(detail::signal_index(trace, f.pred.signal), t),
                             opts);
    case Kind::Not: return !boolean_eval(f.child(), trace, t, opts);
    case Kind::And:
      return boolean_eval(f.child(0), trace, t, opts) && boolean_eval(f.child(1), trace, t, opts);
    case Kind::Or:
      return boolean_eval(f.child(0), trace, t, opts) || boolean_eval(f.child(1), trace, t, opts);
    case Kind::Implies:
      return !boolean_eval(f.child(0), trace, t, opts) || boolean_eval(f.child(1), trace, t, opts);
    case Kind::Globally:
    case Kind::Eventually:
    case Kind::Until: {
      const SampleWindow w = to_samples(f.interval, trace.dt());
      const std::size_t stop = w.open ? n - 1 : std::min(n - 1, t + w.last);
      if (f.kind == Kind::Globally) {
        for (std::size_t k = t + w.first; k <= stop; ++k)
          if (!boolean_eval(f.child(), trace, k, opts)) return false;
        return true;
      }
      if (f.kind == Kind::Eventually) {
        for (std::size_t k = t + w.first; k <= stop; ++k)
          if (boolean_eval(f.child(), trace, k, opts)) return true;
        return false;
      }
      for (std::size_t k = t; k <= stop; ++k) {
        if (k >= t + w.first && boolean_eval(f.child(1), trace, k, opts)) return true;
        if (!boolean_eval(f.child(0), trace, k, opts)) return false;
      }
      return false;
    }
  }
  return false;
}

}  // namespace safenav::stl
