#include <gtest/gtest.h>

#include <cstring>

#include "support.hpp"

using namespace safenav;
using namespace safenav::planner;

namespace {

constexpr const char* kRule3 = "G[0,inf](status_sidewalk -> F[0,5](!status_sidewalk))";

// 40 x 40 cells at 0.5 m; sidewalk band y in [9, 11).
WorldModel band_world() {
  std::vector<int> g(1600, 0);
  for (int r = 18; r < 22; ++r)
    for (int c = 0; c < 40; ++c) g[r * 40 + c] = 1;
  return testsupport::tiny_world(40, 40, 0.5, {"grass", "sidewalk"}, g);
}

semantic::CostMap map_of(const WorldModel& w, std::vector<double> costs) {
  const auto s = semantic::mock_segmentation(w.label_grid(), semantic::identity_confusion(w.labels().size()), 0);
  return semantic::build_cost_map(s, semantic::CostVector(std::move(costs)), w.frame().resolution);
}

PlanningContext context_for(const WorldModel& w, const std::vector<std::string>& texts) {
  PlanningContext ctx;
  ctx.world = &w;
  const auto schema = traces::navigation_schema(w.labels());
  for (std::size_t i = 0; i < texts.size(); ++i)
    ctx.specs.push_back({"r" + std::to_string(i), texts[i], stl::parse_formula(texts[i], schema), 0.0});
  ctx.timing.speed_limit_kph = 5.0;
  return ctx;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

// Hand-built candidate: north to the band, 7 s along it at 1.25 m/s, then north again.
TimedPath lingering_path(const PlanningContext& ctx) {
  return time_path({{2.0, 2.0}, {2.0, 10.0}, {10.75, 10.0}, {10.75, 18.0}}, ctx.timing_for_world());
}

}  // namespace

TEST(Plan, NearStraightOnEmptyMap) {
  const auto w = testsupport::tiny_world(40, 40, 0.5, {"grass"}, {});
  const auto c = map_of(w, {1.0});
  const Vec2 a{0.25, 0.25}, b{19.75, 19.75};
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    PlannerConfig cfg;
    cfg.seed = seed;
    const auto pts = plan_positions(c, a, b, cfg);
    const double straight = (1.0 + cfg.length_weight) * distance(a, b);
    EXPECT_LE(path_cost(c, pts, cfg), 1.4 * straight) << seed;
  }
}

TEST(Plan, ForbiddenGoalIsInfeasible) {
  const auto w = testsupport::tiny_world(20, 20, 0.5, {"grass"}, {});
  auto c = map_of(w, {1.0});
  c.cost(10, 10) = semantic::kDefaultObstacleCost;
  EXPECT_THROW(plan_positions(c, {1, 1}, {5.25, 5.25}, {}), InfeasibleError);
}

TEST(Plan, DeterministicForSeed) {
  const auto w = band_world();
  const auto c = map_of(w, {1.0, 3.0});
  PlannerConfig cfg;
  cfg.seed = 77;
  EXPECT_EQ(plan_positions(c, {1, 1}, {18, 18}, cfg), plan_positions(c, {1, 1}, {18, 18}, cfg));
}

TEST(Timing, ConstantCommandedSpeed) {
  TimingOptions t;
  t.speed_limit_kph = 5.0;
  const TimedPath p = time_path({{0, 0}, {10, 0}}, t);
  EXPECT_DOUBLE_EQ(p.speed_at(0.0), 4.5);
  EXPECT_DOUBLE_EQ(p[1].t, 8.0);
}

TEST(Screen, EmptySpecSetAccepts) {
  const auto w = band_world();
  const auto ctx = context_for(w, {});
  const auto r = ctx.screen(lingering_path(ctx));
  EXPECT_TRUE(r.accepted);
  EXPECT_TRUE(r.segments.empty());
}

TEST(Screen, CompliantPathAccepted) {
  const auto w = band_world();
  const auto ctx = context_for(w, {kRule3, "G[0,inf](speed < 5kph)"});
  const TimedPath p = time_path({{2.0, 2.0}, {2.0, 18.0}}, ctx.timing_for_world());
  const auto r = ctx.screen(p);
  EXPECT_TRUE(r.accepted);
  EXPECT_TRUE(r.segments.empty());
  EXPECT_DOUBLE_EQ(r.results[1].robustness, 0.5);
}

TEST(Screen, LingeringOnSidewalkIsMinusOne) {
  const auto w = band_world();
  const auto ctx = context_for(w, {kRule3});
  const auto r = ctx.screen(lingering_path(ctx));
  ASSERT_EQ(r.results.size(), 1u);
  EXPECT_EQ(r.results[0].robustness, -1.0);
  EXPECT_FALSE(r.accepted);
  ASSERT_FALSE(r.segments.empty());
  // Segments cover only on-sidewalk instants whose exit window closed unsatisfied.
  const Trace tr = traces::derive_trace(lingering_path(ctx), w, ctx.trace);
  const auto side = *tr.schema().find("status_sidewalk");
  for (const auto& s : r.segments)
    for (std::size_t k = s.first; k <= s.last; ++k) EXPECT_EQ(tr.value(side, k), 1.0) << k;
}

TEST(Repair, PreservesWaypointsOutsideWindow) {
  const auto w = band_world();
  const auto ctx = context_for(w, {kRule3});
  const TimedPath path = lingering_path(ctx);
  const auto report = ctx.screen(path);
  ASSERT_FALSE(report.accepted);
  const auto r = repair_plan(path, report, map_of(w, {1.0, 3.0}), ctx);
  EXPECT_TRUE(r.report.accepted);
  EXPECT_FALSE(r.full_replan);
  for (std::size_t i = 0; i <= r.window_first; ++i) {
    EXPECT_TRUE(same_bits(r.path[i].x, path[i].x) && same_bits(r.path[i].y, path[i].y) &&
                same_bits(r.path[i].t, path[i].t))
        << i;
  }
  const std::size_t tail = path.size() - r.window_last;
  ASSERT_GE(r.path.size(), tail);
  for (std::size_t k = 0; k < tail; ++k) {
    const auto& a = r.path[r.path.size() - tail + k];
    const auto& b = path[r.window_last + k];
    EXPECT_TRUE(same_bits(a.x, b.x) && same_bits(a.y, b.y)) << k;
  }
}

TEST(Repair, AcceptedReportIsANoOp) {
  const auto w = band_world();
  const auto ctx = context_for(w, {});
  const TimedPath path = lingering_path(ctx);
  const auto r = repair_plan(path, ctx.screen(path), map_of(w, {1.0, 3.0}), ctx);
  EXPECT_TRUE(r.path == path);
}

TEST(Repair, BlockedMapIsIrreparable) {
  const auto w = band_world();
  const auto ctx = context_for(w, {kRule3});
  const TimedPath path = lingering_path(ctx);
  auto c = map_of(w, {1.0, 3.0});
  for (auto& v : c.cost.data()) v = semantic::kDefaultObstacleCost;
  EXPECT_THROW(repair_plan(path, ctx.screen(path), c, ctx), IrreparableError);
}

TEST(Certify, OpenMapAcceptsFirstTime) {
  const auto w = testsupport::tiny_world(40, 40, 0.5, {"grass", "sidewalk"}, {});
  const auto ctx = context_for(w, {kRule3, "G[0,inf](speed < 5kph)"});
  const auto r = certify_plan(map_of(w, {1.0, 3.0}), {1, 1}, {18, 18}, ctx);
  EXPECT_TRUE(r.report.accepted);
  EXPECT_EQ(r.rounds, 0);
}

TEST(Certify, RepairsLongSidewalkRoute) {
  // Uniform costs: the straight route from the band to just above it runs
  // about 9 m along the sidewalk.
  const auto w = band_world();
  const auto ctx = context_for(w, {kRule3});
  const auto c = map_of(w, {1.0, 1.0});
  PlannerConfig cfg = ctx.planner;
  const TimedPath first = time_path(plan_positions(c, {1.0, 10.0}, {19.0, 12.0}, cfg), ctx.timing_for_world());
  ASSERT_FALSE(ctx.screen(first).accepted);
  const auto r = certify_plan(c, {1.0, 10.0}, {19.0, 12.0}, ctx);
  EXPECT_TRUE(r.report.accepted);
  EXPECT_GE(r.rounds, 1);
  EXPECT_GE(ctx.screen(r.path).results[0].robustness, 0.0);
}

TEST(Certify, UnreachableGoal) {
  const auto w = band_world();
  auto c = map_of(w, {1.0, 3.0});
  for (int col = 0; col < 40; ++col) c.cost(20, col) = semantic::kDefaultObstacleCost;
  const auto ctx = context_for(w, {});
  EXPECT_THROW(certify_plan(c, {1, 1}, {18, 18}, ctx), InfeasibleError);
}

TEST(Certify, ScenarioAAllNormalRulesHold) {
  const Scenario sc = load_scenario(testsupport::source_path("scenarios/scenario_normal.json"));
  const auto r = runtime::certify_from_start(sc, {runtime::derive_seed(sc.seed, 0), std::nullopt});
  ASSERT_TRUE(r.plan.report.accepted);
  EXPECT_EQ(r.plan.report.results.size(), 5u);
  for (const auto& s : r.plan.report.results) EXPECT_GE(s.robustness, 0.0) << s.id;
  // Clearance by construction.
  const Trace tr = traces::derive_trace(r.plan.path, *sc.world, sc.signals);
  for (std::size_t k = 0; k < tr.size(); ++k)
    ASSERT_GE(tr.value(traces::kColDist, k), sc.mode("normal").clearance_margin);
}

TEST(CertifyProperty, ScreeningSoundness) {
  // An accepted plan replayed through the online monitors raises nothing.
  const Scenario sc = load_scenario(testsupport::source_path("scenarios/scenario_normal.json"));
  const auto r = runtime::certify_from_start(sc, {runtime::derive_seed(sc.seed, 0), std::nullopt});
  const Trace tr = traces::derive_trace(r.plan.path, *sc.world, sc.signals);
  for (const auto& spec : hard_specs(sc.mode("normal"))) {
    stl::OnlineMonitor m(spec.formula, tr.schema(), tr.dt(), sc.eval);
    for (std::size_t k = 0; k < tr.size(); ++k) {
      m.step(tr.sample(k));
      ASSERT_EQ(m.new_violations(), 0u) << spec.id << " at " << k;
    }
    EXPECT_NE(m.finalize().status, stl::Status::Violated) << spec.id;
  }
}

TEST(PlanGraph, DisjointChangeLeavesTreeUnchanged) {
  const auto w = testsupport::tiny_world(40, 40, 0.5, {"grass"}, {});
  const auto c = map_of(w, {1.0});
  PlannerConfig cfg;
  const Box box{0.0, 0.0, 8.0, 8.0};
  const PlanGraph g = build_plan_graph(c, {1, 1}, {7, 7}, cfg, box);
  auto c2 = c;
  c2.cost(35, 35) = semantic::kDefaultObstacleCost;
  ++c2.provenance.version;
  const PlanGraph h = update_plan_graph(g, {{35, 35}}, c2, cfg);
  ASSERT_EQ(h.nodes.size(), g.nodes.size());
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    EXPECT_EQ(h.nodes[i].parent, g.nodes[i].parent);
    EXPECT_EQ(h.nodes[i].cost, g.nodes[i].cost);
  }
}

namespace {

void expect_consistent(const PlanGraph& g, const semantic::CostMap& c, const PlannerConfig& cfg) {
  for (std::size_t i = 1; i < g.nodes.size(); ++i) {
    const auto& n = g.nodes[i];
    if (!n.attached) continue;
    ASSERT_GE(n.parent, 0);
    const auto& p = g.nodes[n.parent];
    ASSERT_TRUE(p.attached);
    const auto e = edge_cost(c, p.position, n.position, cfg);
    ASSERT_TRUE(e.has_value()) << "edge into node " << i << " crosses a forbidden cell";
    ASSERT_NEAR(n.cost, p.cost + *e, 1e-9);
    ASSERT_GE(n.cost, p.cost);
  }
}

}  // namespace

TEST(PlanGraph, ForbiddenEdgeIsSeveredAndCostsStayConsistent) {
  const auto w = testsupport::tiny_world(40, 40, 0.5, {"grass"}, {});
  const auto c = map_of(w, {1.0});
  PlannerConfig cfg;
  cfg.seed = 5;
  const PlanGraph g = build_plan_graph(c, {1, 1}, {19, 19}, cfg);
  // Wall across the middle with a gap on the left.
  auto c2 = c;
  std::vector<Cell> changed;
  for (int col = 8; col < 40; ++col) {
    c2.cost(20, col) = semantic::kDefaultObstacleCost;
    changed.push_back({20, col});
  }
  ++c2.provenance.version;
  const PlanGraph h = update_plan_graph(g, changed, c2, cfg);
  expect_consistent(h, c2, cfg);
  EXPECT_EQ(h.map_version, c2.provenance.version);
  // Compare with planning from scratch on the new map.
  const double repaired = path_cost(c2, best_path(h, c2, cfg), cfg);
  const double fresh = path_cost(c2, plan_positions(c2, {1, 1}, {19, 19}, cfg), cfg);
  EXPECT_LE(repaired, 1.05 * fresh);
}

TEST(PlanGraph, AllForbiddenOrphansEverything) {
  const auto w = testsupport::tiny_world(20, 20, 0.5, {"grass"}, {});
  const auto c = map_of(w, {1.0});
  PlannerConfig cfg;
  const PlanGraph g = build_plan_graph(c, {1, 1}, {9, 9}, cfg);
  auto c2 = c;
  std::vector<Cell> all;
  for (int r = 0; r < 20; ++r)
    for (int col = 0; col < 20; ++col) {
      c2.cost(r, col) = semantic::kDefaultObstacleCost;
      all.push_back({r, col});
    }
  const PlanGraph h = update_plan_graph(g, all, c2, cfg);
  EXPECT_EQ(h.attached_count(), 1u);
  EXPECT_THROW(best_path(h, c2, cfg), InfeasibleError);
}
