#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "safenav/safenav.hpp"

namespace testsupport {

using namespace safenav;

inline std::string source_path(const std::string& rel) { return std::string(SAFENAV_SOURCE_DIR) + "/" + rel; }

/// Two real signals and one Boolean, all unitless.
inline SignalSchema abp_schema() {
  SignalSchema s;
  s.add({"a", SignalKind::Real, ""});
  s.add({"b", SignalKind::Real, ""});
  s.add({"p", SignalKind::Boolean, ""});
  return s;
}

/// Random values on a 0.25 grid so that ties and exact zeros show up.
inline Trace random_trace(std::mt19937_64& rng, std::size_t n, double dt) {
  Trace tr(abp_schema(), dt);
  std::uniform_int_distribution<int> q(-12, 12);
  std::bernoulli_distribution coin(0.5);
  for (std::size_t k = 0; k < n; ++k)
    tr.push_back({q(rng) * 0.25, q(rng) * 0.25, coin(rng) ? 1.0 : -1.0});
  return tr;
}

/// Intervals in whole samples, 0 <= lo <= hi <= 10.
inline stl::Interval random_interval(std::mt19937_64& rng, double dt) {
  std::uniform_int_distribution<int> d(0, 10);
  int lo = d(rng), hi = d(rng);
  if (lo > hi) std::swap(lo, hi);
  return {lo * dt, hi * dt};
}

inline stl::Formula random_formula(std::mt19937_64& rng, int depth, double dt) {
  using stl::Formula;
  std::uniform_int_distribution<int> pick(0, depth == 0 ? 2 : 10);
  const int k = pick(rng);
  std::uniform_int_distribution<int> thr(-8, 8);
  switch (k) {
    case 0: {
      const stl::Comparator ops[] = {stl::Comparator::Lt, stl::Comparator::Le, stl::Comparator::Gt,
                                     stl::Comparator::Ge, stl::Comparator::Eq};
      std::uniform_int_distribution<int> op(0, 4);
      return Formula::atom({"a", ops[op(rng)], thr(rng) * 0.25, ""});
    }
    case 1: return Formula::atom({"b", stl::Comparator::Gt, thr(rng) * 0.25, ""});
    case 2: return Formula::atom({"p", stl::Comparator::Bool, 0.0, ""});
    case 3: return Formula::negation(random_formula(rng, depth - 1, dt));
    case 4: return Formula::conjunction(random_formula(rng, depth - 1, dt), random_formula(rng, depth - 1, dt));
    case 5: return Formula::disjunction(random_formula(rng, depth - 1, dt), random_formula(rng, depth - 1, dt));
    case 6: return Formula::implication(random_formula(rng, depth - 1, dt), random_formula(rng, depth - 1, dt));
    case 7:
    case 8: return Formula::globally(random_interval(rng, dt), random_formula(rng, depth - 1, dt));
    case 9: return Formula::eventually(random_interval(rng, dt), random_formula(rng, depth - 1, dt));
    default:
      return Formula::until(random_interval(rng, dt), random_formula(rng, depth - 1, dt),
                            random_formula(rng, depth - 1, dt));
  }
}

/// Literal expansion of the min/max semantics, one sample at a time.
/// Window bounds are whole multiples of dt by construction.
inline double brute_rho(const stl::Formula& f, const Trace& tr, std::size_t t, double eps = 0.05) {
  using stl::Kind;
  const std::size_t n = tr.size();
  const double cap = stl::kCap;
  auto lo_hi = [&](const stl::Interval& i) {
    const auto lo = t + static_cast<std::size_t>(std::llround(i.lo / tr.dt()));
    const std::size_t hi =
        std::isfinite(i.hi) ? std::min(n - 1, t + static_cast<std::size_t>(std::llround(i.hi / tr.dt()))) : n - 1;
    return std::pair{lo, hi};
  };
  switch (f.kind) {
    case Kind::True: return cap;
    case Kind::False: return -cap;
    case Kind::Predicate: {
      const double v = tr.value(f.pred.signal, t);
      const double c = f.pred.threshold;
      switch (f.pred.op) {
        case stl::Comparator::Lt:
        case stl::Comparator::Le: return c - v;
        case stl::Comparator::Gt:
        case stl::Comparator::Ge: return v - c;
        case stl::Comparator::Eq: return eps - std::abs(v - c);
        case stl::Comparator::Bool: return v;
      }
      return 0.0;
    }
    case Kind::Not: return -brute_rho(f.child(), tr, t, eps);
    case Kind::And: return std::min(brute_rho(f.child(0), tr, t, eps), brute_rho(f.child(1), tr, t, eps));
    case Kind::Or: return std::max(brute_rho(f.child(0), tr, t, eps), brute_rho(f.child(1), tr, t, eps));
    case Kind::Implies:
      return std::max(-brute_rho(f.child(0), tr, t, eps), brute_rho(f.child(1), tr, t, eps));
    case Kind::Globally: {
      auto [lo, hi] = lo_hi(f.interval);
      double r = cap;
      for (std::size_t k = lo; k <= hi; ++k) r = std::min(r, brute_rho(f.child(), tr, k, eps));
      return r;
    }
    case Kind::Eventually: {
      auto [lo, hi] = lo_hi(f.interval);
      double r = -cap;
      for (std::size_t k = lo; k <= hi; ++k) r = std::max(r, brute_rho(f.child(), tr, k, eps));
      return r;
    }
    case Kind::Until: {
      auto [lo, hi] = lo_hi(f.interval);
      double r = -cap;
      for (std::size_t k = lo; k <= hi; ++k) {
        double v = brute_rho(f.child(1), tr, k, eps);
        for (std::size_t j = t; j < k; ++j) v = std::min(v, brute_rho(f.child(0), tr, j, eps));
        r = std::max(r, v);
      }
      return r;
    }
  }
  return 0.0;
}

/// Small uniform world: every cell is `fill`, with optional obstacle cells.
inline WorldModel tiny_world(int rows, int cols, double res, std::vector<std::string> labels,
                             const std::vector<int>& grid_labels, std::vector<std::string> obstacles = {},
                             std::vector<Cell> signs = {}, std::vector<StopZone> zones = {}) {
  Grid<int> g(rows, cols, 0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) g(r, c) = grid_labels.empty() ? 0 : grid_labels[r * cols + c];
  return WorldModel(GridFrame{rows, cols, res}, semantic::LabelSet(std::move(labels)), std::move(g),
                    std::move(obstacles), std::move(signs), std::move(zones));
}

}  // namespace testsupport
