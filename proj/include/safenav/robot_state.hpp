#pragma once

#include "safenav/grid.hpp"

namespace safenav {

struct RobotState {
  Vec2 position;
  double speed_kph{0.0};
  double heading{0.0};  // radians
  double battery{1.0};  // fraction in [0, 1]
  double t{0.0};        // seconds
};

inline constexpr double kKphPerMps = 3.6;

}  // namespace safenav
