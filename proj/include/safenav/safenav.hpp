#pragma once

#include "safenav/error.hpp"
#include "safenav/grid.hpp"
#include "safenav/signals.hpp"
#include "safenav/stl/formula.hpp"
#include "safenav/stl/parser.hpp"
#include "safenav/stl/robustness.hpp"
#include "safenav/stl/monitor.hpp"
#include "safenav/semantic_map.hpp"
#include "safenav/world.hpp"
#include "safenav/traces.hpp"
#include "safenav/planner/graph.hpp"
#include "safenav/planner/planner.hpp"
#include "safenav/scenario.hpp"
#include "safenav/log.hpp"
#include "safenav/tne.hpp"
#include "safenav/runtime.hpp"
