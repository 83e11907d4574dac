#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "safenav/error.hpp"
#include "safenav/grid.hpp"
#include "safenav/semantic_map.hpp"

namespace safenav::planner {

enum class InfeasibleReason { ForbiddenStart, ForbiddenGoal, NoPath };

class InfeasibleError : public Error {
 public:
  InfeasibleError(InfeasibleReason reason, const std::string& msg) : Error(msg), reason_(reason) {}
  InfeasibleReason reason() const { return reason_; }

 private:
  InfeasibleReason reason_;
};

class IrreparableError : public Error {
 public:
  using Error::Error;
};

struct PlannerConfig {
  int max_iterations{3000};
  double step_size{2.0};       // m
  double goal_bias{0.05};
  double length_weight{0.1};   // cost per meter on top of the map integral
  std::uint64_t seed{1};
  double repair_growth{2.0};
  int max_escalations{4};
  double rewire_radius{5.0};   // m
  double obstacle_cost{semantic::kDefaultObstacleCost};
  double reweight_factor{10.0};
  int reweight_dilation{1};    // cells
  int max_certify_rounds{6};
  int update_iterations{500};
  double repair_margin{10.0};  // m of slack around a local repair window

  void validate() const {
    if (max_iterations <= 0 || !(step_size > 0.0) || !(goal_bias >= 0.0 && goal_bias <= 1.0) ||
        !(length_weight > 0.0) || !(repair_growth > 1.0) || max_escalations < 0 ||
        !(rewire_radius > 0.0) || !(obstacle_cost > 0.0) || !(reweight_factor >= 1.0) ||
        reweight_dilation < 0 || max_certify_rounds < 0 || update_iterations < 0 ||
        !(repair_margin >= 0.0))
      throw Error("invalid planner configuration");
  }

  friend bool operator==(const PlannerConfig&, const PlannerConfig&) = default;
};

struct Box {
  double x0{0.0}, y0{0.0}, x1{0.0}, y1{0.0};
};

/// Continuous-space tree. Node 0 is the start anchor.
struct PlanNode {
  Vec2 position;
  double cost{0.0};       // cost-to-come
  double edge_cost{0.0};  // cost of the edge from the parent
  int parent{-1};
  bool attached{true};
  std::vector<int> children;
};

struct PlanGraph {
  std::vector<PlanNode> nodes;
  Vec2 start;
  Vec2 goal;
  int map_version{0};

  std::size_t attached_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const PlanNode& n) { return n.attached; }));
  }
};

inline bool free_position(const semantic::CostMap& c, Vec2 p, const PlannerConfig& cfg) {
  const GridFrame f = c.frame();
  return f.contains(p) && c.cost[f.cell_of(p)] < cfg.obstacle_cost;
}

/// Path integral of the map along a->b plus the length term; nullopt when the
/// segment touches a forbidden cell or leaves the map.
inline std::optional<double> edge_cost(const semantic::CostMap& c, Vec2 a, Vec2 b,
                                       const PlannerConfig& cfg) {
  const GridFrame f = c.frame();
  if (!f.contains(a) || !f.contains(b)) return std::nullopt;
  double integral = 0.0;
  bool ok = true;
  traverse_segment(f, a, b, [&](Cell cell, double len) {
    if (!ok) return;
    if (!f.contains(cell) || c.cost[cell] >= cfg.obstacle_cost) {
      ok = false;
      return;
    }
    integral += c.cost[cell] * len;
  });
  if (!ok) return std::nullopt;
  return integral + cfg.length_weight * distance(a, b);
}

inline double path_cost(const semantic::CostMap& c, const std::vector<Vec2>& pts,
                        const PlannerConfig& cfg) {
  double total = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    auto e = edge_cost(c, pts[i - 1], pts[i], cfg);
    if (!e) return std::numeric_limits<double>::infinity();
    total += *e;
  }
  return total;
}

namespace detail {

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline void propagate_costs(PlanGraph& g, int from) {
  std::vector<int> stack{from};
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v : g.nodes[u].children) {
      g.nodes[v].cost = g.nodes[u].cost + g.nodes[v].edge_cost;
      stack.push_back(v);
    }
  }
}

inline void set_parent(PlanGraph& g, int node, int parent, double edge) {
  PlanNode& n = g.nodes[node];
  if (n.parent >= 0) std::erase(g.nodes[n.parent].children, node);
  n.parent = parent;
  n.edge_cost = edge;
  n.cost = g.nodes[parent].cost + edge;
  g.nodes[parent].children.push_back(node);
}

inline void rebuild_children(PlanGraph& g) {
  for (auto& n : g.nodes) n.children.clear();
  for (std::size_t i = 0; i < g.nodes.size(); ++i)
    if (g.nodes[i].attached && g.nodes[i].parent >= 0)
      g.nodes[g.nodes[i].parent].children.push_back(static_cast<int>(i));
}

}  // namespace detail

/// RRT*-style growth: extend toward a sample, choose the cheapest parent in the
/// rewire radius, then rewire neighbours through the new node.
inline void grow_tree(PlanGraph& g, const semantic::CostMap& c, const PlannerConfig& cfg,
                      int iterations, std::mt19937_64& rng, std::optional<Box> region = {}) {
  const GridFrame f = c.frame();
  Box box = region.value_or(Box{0.0, 0.0, f.width_m(), f.height_m()});
  const double r2 = cfg.rewire_radius * cfg.rewire_radius;
  std::vector<int> near;
  for (int it = 0; it < iterations; ++it) {
    Vec2 sample = g.goal;
    if (!(detail::uniform01(rng) < cfg.goal_bias)) {
      const double u = detail::uniform01(rng), v = detail::uniform01(rng);
      sample = {box.x0 + u * (box.x1 - box.x0), box.y0 + v * (box.y1 - box.y0)};
    }
    int nearest = -1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      if (!g.nodes[i].attached) continue;
      const Vec2 d = g.nodes[i].position - sample;
      const double d2 = d.x * d.x + d.y * d.y;
      if (d2 < best) {
        best = d2;
        nearest = static_cast<int>(i);
      }
    }
    if (nearest < 0) return;
    const Vec2 from = g.nodes[nearest].position;
    const double dist = std::sqrt(best);
    if (dist == 0.0) continue;
    const Vec2 pos = dist > cfg.step_size ? from + (cfg.step_size / dist) * (sample - from) : sample;
    if (!free_position(c, pos, cfg)) continue;

    near.clear();
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      if (!g.nodes[i].attached) continue;
      const Vec2 d = g.nodes[i].position - pos;
      if (d.x * d.x + d.y * d.y <= r2 || static_cast<int>(i) == nearest)
        near.push_back(static_cast<int>(i));
    }
    int parent = -1;
    double parent_edge = 0.0, parent_total = std::numeric_limits<double>::infinity();
    for (int i : near) {
      auto e = edge_cost(c, g.nodes[i].position, pos, cfg);
      if (e && g.nodes[i].cost + *e < parent_total) {
        parent_total = g.nodes[i].cost + *e;
        parent = i;
        parent_edge = *e;
      }
    }
    if (parent < 0) continue;
    const int id = static_cast<int>(g.nodes.size());
    g.nodes.push_back(PlanNode{pos, 0.0, 0.0, -1, true, {}});
    detail::set_parent(g, id, parent, parent_edge);

    for (int j : near) {
      if (j == parent) continue;
      auto e = edge_cost(c, pos, g.nodes[j].position, cfg);
      if (e && g.nodes[id].cost + *e < g.nodes[j].cost - 1e-9) {
        detail::set_parent(g, j, id, *e);
        detail::propagate_costs(g, j);
      }
    }
  }
}

struct GoalLink {
  int parent{-1};
  double edge_cost{0.0};
  double total{0.0};
};

/// Cheapest way to finish at the goal: any attached node within the rewire
/// radius of the goal, or the start itself.
inline std::optional<GoalLink> best_goal_link(const PlanGraph& g, const semantic::CostMap& c,
                                              const PlannerConfig& cfg) {
  std::optional<GoalLink> best;
  const double r2 = cfg.rewire_radius * cfg.rewire_radius;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const PlanNode& n = g.nodes[i];
    if (!n.attached) continue;
    const Vec2 d = n.position - g.goal;
    if (i != 0 && d.x * d.x + d.y * d.y > r2) continue;
    auto e = edge_cost(c, n.position, g.goal, cfg);
    if (!e) continue;
    if (!best || n.cost + *e < best->total) best = GoalLink{static_cast<int>(i), *e, n.cost + *e};
  }
  return best;
}

inline std::vector<Vec2> extract_path(const PlanGraph& g, const GoalLink& link) {
  std::vector<Vec2> pts;
  for (int u = link.parent; u >= 0; u = g.nodes[u].parent) pts.push_back(g.nodes[u].position);
  std::reverse(pts.begin(), pts.end());
  if (!(pts.back() == g.goal)) pts.push_back(g.goal);
  return pts;
}

inline void check_endpoints(const semantic::CostMap& c, Vec2 start, Vec2 goal,
                            const PlannerConfig& cfg) {
  if (!free_position(c, start, cfg))
    throw InfeasibleError(InfeasibleReason::ForbiddenStart, "start lies in a forbidden region");
  if (!free_position(c, goal, cfg))
    throw InfeasibleError(InfeasibleReason::ForbiddenGoal, "goal lies in a forbidden region");
}

inline PlanGraph build_plan_graph(const semantic::CostMap& c, Vec2 start, Vec2 goal,
                                  const PlannerConfig& cfg, std::optional<Box> region = {}) {
  cfg.validate();
  check_endpoints(c, start, goal, cfg);
  PlanGraph g;
  g.start = start;
  g.goal = goal;
  g.map_version = c.provenance.version;
  g.nodes.push_back(PlanNode{start, 0.0, 0.0, -1, true, {}});
  std::mt19937_64 rng(cfg.seed);
  grow_tree(g, c, cfg, cfg.max_iterations, rng, region);
  return g;
}

/// Geometric path through the tree; throws InfeasibleError when the goal is not reached.
inline std::vector<Vec2> best_path(const PlanGraph& g, const semantic::CostMap& c,
                                   const PlannerConfig& cfg) {
  auto link = best_goal_link(g, c, cfg);
  if (!link) throw InfeasibleError(InfeasibleReason::NoPath, "no path to the goal was found");
  return extract_path(g, *link);
}

inline std::vector<Vec2> plan_positions(const semantic::CostMap& c, Vec2 start, Vec2 goal,
                                        const PlannerConfig& cfg, std::optional<Box> region = {}) {
  return best_path(build_plan_graph(c, start, goal, cfg, region), c, cfg);
}

/// Repairs a tree after the cells in `changed` took new values in `c`. Edges
/// crossing changed cells are re-costed; subtrees hanging off severed or
/// re-costed edges are re-attached Dijkstra-style through unaffected nodes, and
/// whatever cannot be reached is orphaned. If anything moved the tree is then
/// grown for `update_iterations` more samples.
inline PlanGraph update_plan_graph(const PlanGraph& tree, const std::vector<Cell>& changed,
                                   const semantic::CostMap& c, const PlannerConfig& cfg) {
  PlanGraph g = tree;
  g.map_version = c.provenance.version;
  const GridFrame f = c.frame();
  Grid<std::uint8_t> mark(f.rows, f.cols, 0);
  for (Cell cell : changed)
    if (mark.contains(cell)) mark[cell] = 1;

  const std::size_t n = g.nodes.size();
  std::vector<std::uint8_t> affected(n, 0);
  bool any = false;
  for (std::size_t i = 1; i < n; ++i) {
    PlanNode& node = g.nodes[i];
    if (!node.attached) continue;
    bool touches = false;
    traverse_segment(f, g.nodes[node.parent].position, node.position, [&](Cell cell, double) {
      touches = touches || (mark.contains(cell) && mark[cell]);
    });
    if (!touches) continue;
    affected[i] = 1;
    any = true;
  }
  if (!any) return g;

  // Descendants of affected nodes are affected too.
  std::vector<int> stack;
  for (std::size_t i = 0; i < n; ++i)
    if (affected[i]) stack.push_back(static_cast<int>(i));
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v : g.nodes[u].children)
      if (!affected[v]) {
        affected[v] = 1;
        stack.push_back(v);
      }
  }
  if (!free_position(c, g.nodes[0].position, cfg)) {
    for (std::size_t i = 1; i < n; ++i) affected[i] = g.nodes[i].attached ? 1 : affected[i];
  }

  const double inf = std::numeric_limits<double>::infinity();
  const double r2 = cfg.rewire_radius * cfg.rewire_radius;
  std::vector<double> tentative(n, inf);
  std::vector<int> via(n, -1);
  std::vector<double> via_edge(n, 0.0);
  auto within = [&](std::size_t a, std::size_t b) {
    const Vec2 d = g.nodes[a].position - g.nodes[b].position;
    return d.x * d.x + d.y * d.y <= r2;
  };
  auto relax = [&](std::size_t from, std::size_t to) {
    auto e = edge_cost(c, g.nodes[from].position, g.nodes[to].position, cfg);
    if (!e) return false;
    const double cand = g.nodes[from].cost + *e;
    if (cand < tentative[to]) {
      tentative[to] = cand;
      via[to] = static_cast<int>(from);
      via_edge[to] = *e;
      return true;
    }
    return false;
  };

  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  const bool root_free = free_position(c, g.nodes[0].position, cfg);
  for (std::size_t v = 1; v < n; ++v) {
    if (!affected[v] || !g.nodes[v].attached) continue;
    if (!root_free) continue;
    for (std::size_t u = 0; u < n; ++u) {
      if (affected[u] || !g.nodes[u].attached) continue;
      if (u != static_cast<std::size_t>(g.nodes[v].parent) && !within(u, v)) continue;
      relax(u, v);
    }
    if (tentative[v] < inf) pq.push({tentative[v], static_cast<int>(v)});
  }
  std::vector<std::uint8_t> done(n, 0);
  while (!pq.empty()) {
    auto [d, v] = pq.top();
    pq.pop();
    if (done[v] || d > tentative[v]) continue;
    done[v] = 1;
    g.nodes[v].parent = via[v];
    g.nodes[v].edge_cost = via_edge[v];
    g.nodes[v].cost = tentative[v];
    for (std::size_t w = 1; w < n; ++w) {
      if (!affected[w] || done[w] || !g.nodes[w].attached || !within(v, w)) continue;
      if (relax(static_cast<std::size_t>(v), w)) pq.push({tentative[w], static_cast<int>(w)});
    }
  }
  for (std::size_t v = 1; v < n; ++v) {
    if (affected[v] && !done[v]) {
      g.nodes[v].attached = false;
      g.nodes[v].parent = -1;
      g.nodes[v].edge_cost = 0.0;
      g.nodes[v].cost = inf;
    }
  }
  detail::rebuild_children(g);

  if (cfg.update_iterations > 0 && root_free) {
    std::mt19937_64 rng(cfg.seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(g.map_version + 1)));
    grow_tree(g, c, cfg, cfg.update_iterations, rng);
  }
  return g;
}

}  // namespace safenav::planner
