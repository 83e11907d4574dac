#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "safenav/error.hpp"
#include "safenav/grid.hpp"
#include "safenav/semantic_map.hpp"

namespace safenav {

struct StopZone {
  std::string name;
  /// Inclusive rectangles {row0, col0, row1, col1}.
  std::vector<std::array<int, 4>> rects;
  friend bool operator==(const StopZone&, const StopZone&) = default;
};

/// Ground truth of a top-down world: labels, obstacles, stop signs and zones.
/// The label grid doubles as the image grid of the segmenter.
class WorldModel {
 public:
  WorldModel() = default;

  WorldModel(GridFrame frame, semantic::LabelSet labels, Grid<int> label_grid,
             std::vector<std::string> obstacle_labels, std::vector<Cell> stop_signs = {},
             std::vector<StopZone> stop_zones = {})
      : frame_(frame), labels_(std::move(labels)), label_grid_(std::move(label_grid)),
        obstacle_labels_(std::move(obstacle_labels)), stop_sign_cells_(std::move(stop_signs)),
        stop_zones_(std::move(stop_zones)) {
    if (label_grid_.rows() != frame_.rows || label_grid_.cols() != frame_.cols)
      throw FormatError("label grid shape does not match world dimensions");
    if (!(frame_.resolution > 0.0)) throw FormatError("world resolution must be positive");
    for (int v : label_grid_.data())
      if (v < 0 || static_cast<std::size_t>(v) >= labels_.size())
        throw FormatError("label grid references an undeclared label");
    mask_ = semantic::ObstacleMask(frame_.rows, frame_.cols, 0);
    std::vector<int> obstacle_ids;
    for (const auto& name : obstacle_labels_) {
      auto k = labels_.find(name);
      if (!k) throw FormatError("obstacle label '" + name + "' is not declared");
      obstacle_ids.push_back(static_cast<int>(*k));
    }
    for (std::size_t i = 0; i < label_grid_.size(); ++i)
      for (int id : obstacle_ids)
        if (label_grid_.data()[i] == id) mask_.data()[i] = 1;
    distance_ = semantic::distance_field(mask_, frame_.resolution);

    zone_grid_ = Grid<int>(frame_.rows, frame_.cols, -1);
    for (std::size_t z = 0; z < stop_zones_.size(); ++z) {
      for (const auto& r : stop_zones_[z].rects) {
        for (int row = r[0]; row <= r[2]; ++row)
          for (int col = r[1]; col <= r[3]; ++col) {
            if (!frame_.contains(Cell{row, col})) throw FormatError("stop zone leaves the world");
            zone_grid_(row, col) = static_cast<int>(z);
          }
      }
    }
    for (Cell c : stop_sign_cells_) {
      if (!frame_.contains(c)) throw FormatError("stop sign outside the world");
      stop_signs_.push_back(frame_.center_of(c));
    }
  }

  const GridFrame& frame() const { return frame_; }
  const semantic::LabelSet& labels() const { return labels_; }
  const Grid<int>& label_grid() const { return label_grid_; }
  const std::vector<std::string>& obstacle_labels() const { return obstacle_labels_; }
  const semantic::ObstacleMask& obstacle_mask() const { return mask_; }
  const semantic::DistanceField& distance() const { return distance_; }
  const std::vector<Cell>& stop_sign_cells() const { return stop_sign_cells_; }
  const std::vector<Vec2>& stop_signs() const { return stop_signs_; }
  const std::vector<StopZone>& stop_zones() const { return stop_zones_; }

  int label_at(Cell c) const { return label_grid_.at(c); }
  /// Stop zone index covering the cell, or -1.
  int zone_at(Cell c) const { return zone_grid_.at(c); }

 private:
  GridFrame frame_;
  semantic::LabelSet labels_;
  Grid<int> label_grid_;
  std::vector<std::string> obstacle_labels_;
  std::vector<Cell> stop_sign_cells_;
  std::vector<StopZone> stop_zones_;
  semantic::ObstacleMask mask_;
  semantic::DistanceField distance_;
  Grid<int> zone_grid_;
  std::vector<Vec2> stop_signs_;
};

/// World document:
/// {
///   "rows": H, "cols": W, "resolution": m,
///   "labels": [...], "obstacle_labels": [...],
///   "legend": {"g": "grass", ...},
///   "grid": ["gg..", ...],            // grid[0] is row 0 (y in [0, res))
///   "stop_signs": [[row, col], ...],
///   "stop_zones": [{"name": "...", "cells": [[r0, c0, r1, c1], ...]}]
/// }
inline WorldModel world_from_json(const nlohmann::json& j) {
  try {
    GridFrame frame{j.at("rows").get<int>(), j.at("cols").get<int>(),
                    j.at("resolution").get<double>()};
    if (frame.rows <= 0 || frame.cols <= 0) throw FormatError("world dimensions must be positive");
    semantic::LabelSet labels(j.at("labels").get<std::vector<std::string>>());
    std::map<char, int> legend;
    for (const auto& [key, value] : j.at("legend").items()) {
      if (key.size() != 1) throw FormatError("legend keys must be single characters");
      legend[key[0]] = static_cast<int>(labels.index_of(value.get<std::string>()));
    }
    const auto rows = j.at("grid").get<std::vector<std::string>>();
    if (static_cast<int>(rows.size()) != frame.rows)
      throw FormatError("grid has " + std::to_string(rows.size()) + " rows, expected " +
                        std::to_string(frame.rows));
    Grid<int> grid(frame.rows, frame.cols, 0);
    for (int r = 0; r < frame.rows; ++r) {
      if (static_cast<int>(rows[r].size()) != frame.cols)
        throw FormatError("grid row " + std::to_string(r) + " has the wrong width");
      for (int c = 0; c < frame.cols; ++c) {
        auto it = legend.find(rows[r][c]);
        if (it == legend.end())
          throw FormatError(std::string("grid symbol '") + rows[r][c] + "' missing from legend");
        grid(r, c) = it->second;
      }
    }
    std::vector<Cell> signs;
    for (const auto& s : j.value("stop_signs", nlohmann::json::array()))
      signs.push_back({s.at(0).get<int>(), s.at(1).get<int>()});
    std::vector<StopZone> zones;
    for (const auto& z : j.value("stop_zones", nlohmann::json::array())) {
      StopZone zone{z.at("name").get<std::string>(), {}};
      for (const auto& r : z.at("cells")) zone.rects.push_back(r.get<std::array<int, 4>>());
      zones.push_back(std::move(zone));
    }
    return WorldModel(frame, std::move(labels), std::move(grid),
                      j.value("obstacle_labels", std::vector<std::string>{}), std::move(signs),
                      std::move(zones));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed world document: ") + e.what());
  } catch (const semantic::MapError& e) {
    throw FormatError(std::string("malformed world document: ") + e.what());
  }
}

inline nlohmann::json world_to_json(const WorldModel& w) {
  nlohmann::json j;
  j["rows"] = w.frame().rows;
  j["cols"] = w.frame().cols;
  j["resolution"] = w.frame().resolution;
  j["labels"] = w.labels().names();
  j["obstacle_labels"] = w.obstacle_labels();
  // Symbols: first unused letter of each label name, falling back to digits.
  std::map<int, char> symbol;
  std::string used;
  for (std::size_t k = 0; k < w.labels().size(); ++k) {
    char sym = 0;
    for (char ch : w.labels()[k] + "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ")
      if (used.find(ch) == std::string::npos) {
        sym = ch;
        break;
      }
    used.push_back(sym);
    symbol[static_cast<int>(k)] = sym;
    j["legend"][std::string(1, sym)] = w.labels()[k];
  }
  std::vector<std::string> rows;
  for (int r = 0; r < w.frame().rows; ++r) {
    std::string row(static_cast<std::size_t>(w.frame().cols), ' ');
    for (int c = 0; c < w.frame().cols; ++c) row[c] = symbol[w.label_grid()(r, c)];
    rows.push_back(std::move(row));
  }
  j["grid"] = rows;
  j["stop_signs"] = nlohmann::json::array();
  for (Cell c : w.stop_sign_cells()) j["stop_signs"].push_back({c.row, c.col});
  j["stop_zones"] = nlohmann::json::array();
  for (const auto& z : w.stop_zones()) j["stop_zones"].push_back({{"name", z.name}, {"cells", z.rects}});
  return j;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
}

inline WorldModel load_world(const std::filesystem::path& path) {
  return world_from_json(read_json_file(path));
}

}  // namespace safenav
