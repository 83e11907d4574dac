#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace safenav::stl {

/// Robustness values are clamped to [-kCap, +kCap] so arithmetic stays finite.
inline constexpr double kCap = 1e9;
inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

inline double clamp_robustness(double v) {
  if (std::isnan(v)) return -kCap;
  return v > kCap ? kCap : (v < -kCap ? -kCap : v);
}

enum class Comparator { Lt, Le, Gt, Ge, Eq, Bool };

struct Predicate {
  std::string signal;
  Comparator op{Comparator::Bool};
  double threshold{0.0};
  std::string unit;  // as written; empty when omitted
  friend bool operator==(const Predicate&, const Predicate&) = default;
};

/// Closed time interval in seconds; hi may be kUnbounded.
struct Interval {
  double lo{0.0};
  double hi{kUnbounded};
  bool bounded() const { return std::isfinite(hi); }
  friend bool operator==(const Interval&, const Interval&) = default;
};

enum class Kind { True, False, Predicate, Not, And, Or, Implies, Globally, Eventually, Until };

/// Immutable-by-convention STL syntax tree. Binary operators have exactly two
/// children; Until stores (left, right).
struct Formula {
  Kind kind{Kind::True};
  Predicate pred;
  Interval interval;
  std::vector<Formula> children;

  static Formula truth() { return {Kind::True, {}, {}, {}}; }
  static Formula falsity() { return {Kind::False, {}, {}, {}}; }
  static Formula atom(Predicate p) { return {Kind::Predicate, std::move(p), {}, {}}; }
  static Formula negation(Formula f) { return {Kind::Not, {}, {}, {std::move(f)}}; }
  static Formula conjunction(Formula a, Formula b) {
    return {Kind::And, {}, {}, {std::move(a), std::move(b)}};
  }
  static Formula disjunction(Formula a, Formula b) {
    return {Kind::Or, {}, {}, {std::move(a), std::move(b)}};
  }
  static Formula implication(Formula a, Formula b) {
    return {Kind::Implies, {}, {}, {std::move(a), std::move(b)}};
  }
  static Formula globally(Interval i, Formula f) { return {Kind::Globally, {}, i, {std::move(f)}}; }
  static Formula eventually(Interval i, Formula f) {
    return {Kind::Eventually, {}, i, {std::move(f)}};
  }
  static Formula until(Interval i, Formula l, Formula r) {
    return {Kind::Until, {}, i, {std::move(l), std::move(r)}};
  }

  bool temporal() const {
    return kind == Kind::Globally || kind == Kind::Eventually || kind == Kind::Until;
  }

  const Formula& child(std::size_t i = 0) const { return children.at(i); }

  bool operator==(const Formula& o) const {
    return kind == o.kind && pred == o.pred && interval == o.interval && children == o.children;
  }
};

/// Rewrites p -> q as !p || q. Robustness is preserved exactly.
inline Formula normalize_implications(const Formula& f) {
  Formula out = f;
  for (auto& c : out.children) c = normalize_implications(c);
  if (out.kind == Kind::Implies)
    return Formula::disjunction(Formula::negation(out.children[0]), out.children[1]);
  return out;
}

/// Number of tree nodes.
inline std::size_t size(const Formula& f) {
  std::size_t n = 1;
  for (const auto& c : f.children) n += size(c);
  return n;
}

/// Future reach of the formula in seconds (kUnbounded if any window is open-ended).
inline double horizon(const Formula& f) {
  double h = 0.0;
  for (const auto& c : f.children) h = std::max(h, horizon(c));
  if (f.temporal()) h += f.interval.hi;
  return h;
}

inline std::vector<std::string> signals_of(const Formula& f) {
  std::vector<std::string> out;
  if (f.kind == Kind::Predicate) out.push_back(f.pred.signal);
  for (const auto& c : f.children)
    for (auto& s : signals_of(c))
      if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(std::move(s));
  return out;
}

inline std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline const char* comparator_text(Comparator c) {
  switch (c) {
    case Comparator::Lt: return "<";
    case Comparator::Le: return "<=";
    case Comparator::Gt: return ">";
    case Comparator::Ge: return ">=";
    case Comparator::Eq: return "==";
    case Comparator::Bool: return "";
  }
  return "";
}

/// Canonical text in the specification grammar; parses back to an equal tree.
inline std::string to_string(const Formula& f) {
  auto interval = [](const Interval& i) {
    return "[" + format_number(i.lo) + "," + format_number(i.hi) + "]";
  };
  switch (f.kind) {
    case Kind::True: return "true";
    case Kind::False: return "false";
    case Kind::Predicate:
      if (f.pred.op == Comparator::Bool) return f.pred.signal;
      return f.pred.signal + " " + comparator_text(f.pred.op) + " " +
             format_number(f.pred.threshold) + f.pred.unit;
    case Kind::Not: return "!(" + to_string(f.child()) + ")";
    case Kind::And: return "(" + to_string(f.child(0)) + " && " + to_string(f.child(1)) + ")";
    case Kind::Or: return "(" + to_string(f.child(0)) + " || " + to_string(f.child(1)) + ")";
    case Kind::Implies:
      return "(" + to_string(f.child(0)) + " -> " + to_string(f.child(1)) + ")";
    case Kind::Globally: return "G" + interval(f.interval) + "(" + to_string(f.child()) + ")";
    case Kind::Eventually: return "F" + interval(f.interval) + "(" + to_string(f.child()) + ")";
    case Kind::Until:
      return "(" + to_string(f.child(0)) + ")U" + interval(f.interval) + "(" +
             to_string(f.child(1)) + ")";
  }
  return "";
}

}  // namespace safenav::stl
