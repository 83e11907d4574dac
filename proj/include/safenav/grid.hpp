#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "safenav/error.hpp"

namespace safenav {

struct Vec2 {
  double x{0.0};
  double y{0.0};

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2 a, Vec2 b) = default;

  double norm() const { return std::hypot(x, y); }
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

/// Integer cell address. Row indexes y, column indexes x.
struct Cell {
  int row{0};
  int col{0};
  friend bool operator==(Cell, Cell) = default;
  friend auto operator<=>(Cell, Cell) = default;
};

class OutOfBoundsError : public Error {
 public:
  using Error::Error;
};

/// Dense row-major H x W grid.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols),
        data_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool contains(Cell c) const {
    return c.row >= 0 && c.col >= 0 && c.row < rows_ && c.col < cols_;
  }

  T& operator()(int r, int c) { return data_[index(r, c)]; }
  const T& operator()(int r, int c) const { return data_[index(r, c)]; }
  T& operator[](Cell c) { return data_[index(c.row, c.col)]; }
  const T& operator[](Cell c) const { return data_[index(c.row, c.col)]; }

  T& at(Cell c) {
    if (!contains(c)) throw OutOfBoundsError("cell outside grid");
    return (*this)[c];
  }
  const T& at(Cell c) const {
    if (!contains(c)) throw OutOfBoundsError("cell outside grid");
    return (*this)[c];
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool same_shape(const Grid& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(int r, int c) const {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) +
           static_cast<std::size_t>(c);
  }

  int rows_{0};
  int cols_{0};
  std::vector<T> data_;
};

/// Metric frame of a grid: cell (r, c) spans [c*res, (c+1)*res) x [r*res, (r+1)*res).
/// Points on a cell boundary belong to the higher-index cell.
struct GridFrame {
  int rows{0};
  int cols{0};
  double resolution{0.5};

  double width_m() const { return cols * resolution; }
  double height_m() const { return rows * resolution; }

  Cell cell_of(Vec2 p) const {
    return {static_cast<int>(std::floor(p.y / resolution)),
            static_cast<int>(std::floor(p.x / resolution))};
  }
  Vec2 center_of(Cell c) const {
    return {(c.col + 0.5) * resolution, (c.row + 0.5) * resolution};
  }
  bool contains(Cell c) const {
    return c.row >= 0 && c.col >= 0 && c.row < rows && c.col < cols;
  }
  bool contains(Vec2 p) const { return contains(cell_of(p)); }

  Cell checked_cell(Vec2 p) const {
    Cell c = cell_of(p);
    if (!contains(c)) throw OutOfBoundsError("position outside world bounds");
    return c;
  }
};

/// Exact traversal of the cells crossed by segment a->b, reporting the length
/// of the segment inside each cell (Amanatides-Woo). Cells are reported in order.
template <typename Visit>
void traverse_segment(const GridFrame& frame, Vec2 a, Vec2 b, Visit&& visit) {
  const double res = frame.resolution;
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len = std::hypot(dx, dy);
  Cell cell = frame.cell_of(a);
  if (len == 0.0) {
    visit(cell, 0.0);
    return;
  }
  const Cell last = frame.cell_of(b);
  const int step_c = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
  const int step_r = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // Parametric distance (0..1) to the next vertical / horizontal boundary.
  double t_max_x = kInf, t_max_y = kInf, t_delta_x = kInf, t_delta_y = kInf;
  if (step_c != 0) {
    const double next = (step_c > 0 ? (cell.col + 1) : cell.col) * res;
    t_max_x = (next - a.x) / dx;
    t_delta_x = res / std::abs(dx);
  }
  if (step_r != 0) {
    const double next = (step_r > 0 ? (cell.row + 1) : cell.row) * res;
    t_max_y = (next - a.y) / dy;
    t_delta_y = res / std::abs(dy);
  }
  double t = 0.0;
  // Bounded walk guards against floating drift near corners.
  const int max_steps = std::abs(last.row - cell.row) + std::abs(last.col - cell.col) + 2;
  for (int i = 0; i <= max_steps; ++i) {
    if (cell == last) {
      visit(cell, (1.0 - t) * len);
      return;
    }
    if (t_max_x < t_max_y) {
      visit(cell, (std::min(t_max_x, 1.0) - t) * len);
      t = t_max_x;
      t_max_x += t_delta_x;
      cell.col += step_c;
    } else {
      visit(cell, (std::min(t_max_y, 1.0) - t) * len);
      t = t_max_y;
      t_max_y += t_delta_y;
      cell.row += step_r;
    }
    if (t >= 1.0) {
      if (!(cell == last)) visit(last, 0.0);
      return;
    }
  }
  visit(last, std::max(0.0, (1.0 - t) * len));
}

}  // namespace safenav
