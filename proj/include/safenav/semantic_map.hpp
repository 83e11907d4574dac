#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "safenav/error.hpp"
#include "safenav/grid.hpp"

namespace safenav::semantic {

/// Distances reported for cells with no obstacle anywhere on the map.
inline constexpr double kDistanceCap = 1e9;
/// Cost assigned to obstacle cells and their clearance band; cells at or above
/// this value are impassable.
inline constexpr double kDefaultObstacleCost = 1e6;

enum class MapErrorKind {
  DimensionMismatch,
  NegativeMargin,
  NonStochastic,
  OutOfBounds,
  FactorBelowOne,
  InvalidValue,
  UnknownLabel,
};

class MapError : public Error {
 public:
  MapError(MapErrorKind kind, const std::string& msg) : Error(msg), kind_(kind) {}
  MapErrorKind kind() const { return kind_; }

 private:
  MapErrorKind kind_;
};

class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<std::string> names) : names_(std::move(names)) {
    std::set<std::string> seen;
    for (const auto& n : names_)
      if (!seen.insert(n).second)
        throw MapError(MapErrorKind::InvalidValue, "duplicate label '" + n + "'");
  }

  std::size_t size() const { return names_.size(); }
  const std::string& operator[](std::size_t k) const { return names_[k]; }
  const std::vector<std::string>& names() const { return names_; }

  std::optional<std::size_t> find(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names_.begin());
  }
  std::size_t index_of(const std::string& name) const {
    auto k = find(name);
    if (!k) throw MapError(MapErrorKind::UnknownLabel, "unknown label '" + name + "'");
    return *k;
  }

  friend bool operator==(const LabelSet&, const LabelSet&) = default;

 private:
  std::vector<std::string> names_;
};

/// Per-cell label confidences S[i][j][k] in [0, 1]. Rows of a cell need not sum to one.
class SegmentationTensor {
 public:
  SegmentationTensor() = default;
  SegmentationTensor(int rows, int cols, std::size_t labels)
      : rows_(rows), cols_(cols), labels_(labels),
        data_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * labels, 0.0) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t labels() const { return labels_; }

  double operator()(int r, int c, std::size_t k) const { return data_[index(r, c, k)]; }

  void set(int r, int c, std::size_t k, double v) {
    if (!(v >= 0.0 && v <= 1.0))
      throw MapError(MapErrorKind::InvalidValue, "segmentation confidence outside [0,1]");
    data_[index(r, c, k)] = v;
  }

  const double* cell(int r, int c) const { return data_.data() + index(r, c, 0); }

  friend bool operator==(const SegmentationTensor&, const SegmentationTensor&) = default;

 private:
  std::size_t index(int r, int c, std::size_t k) const {
    return (static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) +
            static_cast<std::size_t>(c)) * labels_ + k;
  }

  int rows_{0};
  int cols_{0};
  std::size_t labels_{0};
  std::vector<double> data_;
};

/// Operator-provided non-negative cost per label, aligned with a LabelSet.
class CostVector {
 public:
  CostVector() = default;
  explicit CostVector(std::vector<double> costs) : costs_(std::move(costs)) {
    for (double c : costs_)
      if (!(c >= 0.0) || !std::isfinite(c))
        throw MapError(MapErrorKind::InvalidValue, "label costs must be finite and non-negative");
  }

  std::size_t size() const { return costs_.size(); }
  double operator[](std::size_t k) const { return costs_[k]; }
  const std::vector<double>& values() const { return costs_; }

  friend bool operator==(const CostVector&, const CostVector&) = default;

 private:
  std::vector<double> costs_;
};

struct Provenance {
  std::string mode;
  int version{0};
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct CostMap {
  Grid<double> cost;
  double resolution{0.5};
  Provenance provenance;

  GridFrame frame() const { return {cost.rows(), cost.cols(), resolution}; }
  double operator[](Cell c) const { return cost[c]; }
};

using ObstacleMask = Grid<std::uint8_t>;

struct DistanceField {
  Grid<double> meters;
  double resolution{0.5};
  double operator[](Cell c) const { return meters[c]; }
};

/// C[i][j] = sum_k S[i][j][k] * c[k].
inline CostMap build_cost_map(const SegmentationTensor& s, const CostVector& c,
                              double resolution = 0.5, Provenance provenance = {}) {
  if (s.labels() != c.size())
    throw MapError(MapErrorKind::DimensionMismatch,
                   "segmentation has " + std::to_string(s.labels()) + " labels but cost vector has " +
                       std::to_string(c.size()));
  CostMap out{Grid<double>(s.rows(), s.cols(), 0.0), resolution, std::move(provenance)};
  for (int r = 0; r < s.rows(); ++r) {
    for (int col = 0; col < s.cols(); ++col) {
      const double* conf = s.cell(r, col);
      double sum = 0.0;
      for (std::size_t k = 0; k < c.size(); ++k) sum += conf[k] * c[k];
      out.cost(r, col) = sum;
    }
  }
  return out;
}

namespace detail {

/// Squared 1-D distance transform (Felzenszwalb-Huttenlocher). Infinite entries
/// are not sites; with no finite site every output is infinite.
inline void edt_1d(const std::vector<double>& f, std::vector<double>& d) {
  const int n = static_cast<int>(f.size());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (!std::isfinite(f[q])) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s = 0.0;
    while (true) {
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p);
      if (s <= z[k]) {
        --k;  // z[0] is -inf, so k stays >= 0
        continue;
      }
      break;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) {
    std::fill(d.begin(), d.end(), kInf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double diff = q - v[j];
    d[q] = diff * diff + f[v[j]];
  }
}

}  // namespace detail

/// Exact Euclidean distance (meters) from every cell center to the nearest
/// obstacle cell center. Obstacle cells are 0; an empty mask yields kDistanceCap.
inline DistanceField distance_field(const ObstacleMask& mask, double resolution) {
  const int rows = mask.rows(), cols = mask.cols();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Grid<double> sq(rows, cols, kInf);
  std::vector<double> f(rows), d(rows);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) f[r] = mask(r, c) ? 0.0 : kInf;
    detail::edt_1d(f, d);
    for (int r = 0; r < rows; ++r) sq(r, c) = d[r];
  }
  f.resize(cols);
  d.resize(cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) f[c] = sq(r, c);
    detail::edt_1d(f, d);
    for (int c = 0; c < cols; ++c) sq(r, c) = d[c];
  }
  DistanceField out{Grid<double>(rows, cols, kDistanceCap), resolution};
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      if (std::isfinite(sq(r, c))) out.meters(r, c) = resolution * std::sqrt(sq(r, c));
  return out;
}

/// Raises every cell closer than `margin` meters to an obstacle to at least
/// `obstacle_cost`. Other cells are untouched.
inline CostMap inflate_obstacle_buffer(const CostMap& c, const ObstacleMask& mask, double margin,
                                       double obstacle_cost = kDefaultObstacleCost) {
  if (margin < 0.0) throw MapError(MapErrorKind::NegativeMargin, "clearance margin must be >= 0");
  if (mask.rows() != c.cost.rows() || mask.cols() != c.cost.cols())
    throw MapError(MapErrorKind::DimensionMismatch, "obstacle mask shape differs from cost map");
  CostMap out = c;
  if (margin == 0.0) return out;
  const DistanceField dist = distance_field(mask, c.resolution);
  for (std::size_t i = 0; i < out.cost.size(); ++i)
    if (dist.meters.data()[i] < margin)
      out.cost.data()[i] = std::max(out.cost.data()[i], obstacle_cost);
  return out;
}

inline bool forbidden(const CostMap& c, Cell cell, double obstacle_cost = kDefaultObstacleCost) {
  return c.cost[cell] >= obstacle_cost;
}

inline std::size_t count_forbidden(const CostMap& c, double obstacle_cost = kDefaultObstacleCost) {
  return static_cast<std::size_t>(std::count_if(c.cost.data().begin(), c.cost.data().end(),
                                                [&](double v) { return v >= obstacle_cost; }));
}

/// Row-stochastic label confusion: row k is the confidence vector reported for a
/// cell whose true label is k.
using ConfusionMatrix = std::vector<std::vector<double>>;

inline ConfusionMatrix identity_confusion(std::size_t n) {
  ConfusionMatrix m(n, std::vector<double>(n, 0.0));
  for (std::size_t k = 0; k < n; ++k) m[k][k] = 1.0;
  return m;
}

/// Keeps 1 - mass on the true label and spreads `mass` evenly over the others.
inline ConfusionMatrix uniform_confusion(std::size_t n, double mass) {
  ConfusionMatrix m(n, std::vector<double>(n, n > 1 ? mass / double(n - 1) : 0.0));
  for (std::size_t k = 0; k < n; ++k) m[k][k] = n > 1 ? 1.0 - mass : 1.0;
  return m;
}

struct MockSegmentationOptions {
  /// Amplitude of seeded uniform noise added to each confidence before clipping.
  double noise{0.0};
};

/// Stand-in for an open-vocabulary segmenter: each cell reports the confusion
/// row of its true label, optionally perturbed, deterministically from `seed`.
inline SegmentationTensor mock_segmentation(const Grid<int>& truth, const ConfusionMatrix& confusion,
                                            std::uint64_t seed,
                                            const MockSegmentationOptions& opts = {}) {
  const std::size_t n = confusion.size();
  for (const auto& row : confusion) {
    if (row.size() != n)
      throw MapError(MapErrorKind::NonStochastic, "confusion matrix must be square");
    double sum = 0.0;
    for (double v : row) {
      if (v < 0.0 || v > 1.0)
        throw MapError(MapErrorKind::NonStochastic, "confusion entries must lie in [0,1]");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw MapError(MapErrorKind::NonStochastic, "confusion rows must sum to 1");
  }
  std::mt19937_64 rng(seed);
  auto uniform = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  SegmentationTensor s(truth.rows(), truth.cols(), n);
  for (int r = 0; r < truth.rows(); ++r) {
    for (int c = 0; c < truth.cols(); ++c) {
      const int label = truth(r, c);
      if (label < 0 || static_cast<std::size_t>(label) >= n)
        throw MapError(MapErrorKind::DimensionMismatch, "truth label outside confusion matrix");
      for (std::size_t k = 0; k < n; ++k) {
        double v = confusion[label][k];
        if (opts.noise > 0.0) v += opts.noise * (2.0 * uniform() - 1.0);
        s.set(r, c, k, std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return s;
}

/// Multiplies the listed cells (each once) by `factor` >= 1 and bumps the version.
inline CostMap reweight_region(const CostMap& c, const std::vector<Cell>& cells, double factor) {
  if (!(factor >= 1.0))
    throw MapError(MapErrorKind::FactorBelowOne, "re-weighting factor must be >= 1");
  for (Cell cell : cells)
    if (!c.cost.contains(cell))
      throw MapError(MapErrorKind::OutOfBounds, "re-weighting region leaves the map");
  CostMap out = c;
  std::set<Cell> unique(cells.begin(), cells.end());
  for (Cell cell : unique) out.cost[cell] *= factor;
  ++out.provenance.version;
  return out;
}

}  // namespace safenav::semantic
