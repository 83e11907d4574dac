#include <gtest/gtest.h>

#include <set>

#include "support.hpp"

using namespace safenav;
using namespace safenav::runtime;

namespace {

Scenario scenario(const std::string& name) {
  return load_scenario(testsupport::source_path("scenarios/" + name + ".json"));
}

EpisodeResult trial0(const Scenario& sc) { return run_episode(sc, {derive_seed(sc.seed, 0), std::nullopt}); }

double spec_robustness(const nlohmann::json& report, const std::string& id) {
  for (const auto& s : report.at("specs"))
    if (s.at("id") == id) return s.at("robustness").get<double>();
  ADD_FAILURE() << "no spec " << id;
  return 0.0;
}

}  // namespace

TEST(Dynamics, ThreeKphForOneSecond) {
  RobotState s;
  const RobotState n = step_dynamics(s, {3.0, 0.0}, 1.0);
  EXPECT_NEAR(n.position.x, 3.0 / 3.6, 1e-15);
  EXPECT_NEAR(n.position.x, 0.8333, 1e-4);
  EXPECT_EQ(n.position.y, 0.0);
  EXPECT_EQ(n.t, 1.0);
}

TEST(Dynamics, ZeroCommandStaysPut) {
  RobotState s;
  s.position = {4.0, 2.0};
  const RobotState n = step_dynamics(s, {0.0, 1.0}, 0.5);
  EXPECT_EQ(n.position, s.position);
  EXPECT_EQ(n.speed_kph, 0.0);
  EXPECT_THROW(step_dynamics(s, {-1.0, 0.0}, 0.5), Error);
}

TEST(Dynamics, DisturbanceAddsToSpeed) {
  RobotState s;
  EXPECT_DOUBLE_EQ(step_dynamics(s, {3.0, 0.0}, 0.5, {2.5, {}}).speed_kph, 5.5);
  EXPECT_EQ(step_dynamics(s, {1.0, 0.0}, 0.5, {-2.5, {}}).speed_kph, 0.0);
}

TEST(Disturbances, ScheduleAndSeededJitter) {
  const DisturbanceModel m({{10, 10, 2.5, {}}}, 0.3, 99);
  const DisturbanceModel same({{10, 10, 2.5, {}}}, 0.3, 99);
  const DisturbanceModel other({{10, 10, 2.5, {}}}, 0.3, 100);
  bool differs = false;
  for (std::size_t k = 0; k < 30; ++k) {
    EXPECT_EQ(m.at(k).speed_offset_kph, same.at(k).speed_offset_kph);
    EXPECT_LE(std::abs(m.at(k).speed_offset_kph - (k == 10 ? 2.5 : 0.0)), 0.3);
    differs = differs || m.at(k).speed_offset_kph != other.at(k).speed_offset_kph;
  }
  EXPECT_TRUE(differs);
  const DisturbanceModel plain({{10, 10, 2.5, {}}}, 0.0, 1);
  EXPECT_EQ(plain.at(10).speed_offset_kph, 2.5);
  EXPECT_EQ(plain.at(11).speed_offset_kph, 0.0);
}

TEST(Seeds, DeriveSeedSpreadsIndices) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(7, i));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(derive_seed(7, 3), derive_seed(7, 3));
}

TEST(Episode, ScenarioAReachesGoalWithoutViolations) {
  const Scenario sc = scenario("scenario_normal");
  const EpisodeResult r = trial0(sc);
  EXPECT_EQ(r.outcome, "goal_reached");
  EXPECT_TRUE(r.log.events("violation").empty());
  for (const auto* t : r.log.ticks())
    for (const auto& v : t->verdicts) ASSERT_NE(v.status, stl::Status::Violated) << v.spec << " tick " << t->tick;
}

TEST(Episode, DisturbanceFreeFidelity) {
  const Scenario sc = scenario("scenario_normal");
  const EpisodeResult r = trial0(sc);
  ASSERT_EQ(r.plans.size(), 1u);
  traces::TraceOptions o = sc.signals;
  o.dt = sc.dt;
  const Trace planned = traces::derive_trace(r.plans[0].path, *sc.world, o);
  ASSERT_EQ(r.trace.size(), planned.size());
  for (std::size_t k = 0; k < planned.size(); ++k)
    for (std::size_t i = 0; i < planned.schema().size(); ++i)
      ASSERT_NEAR(r.trace.value(i, k), planned.value(i, k), 1e-9) << planned.schema()[i].name << " at " << k;
}

TEST(Episode, ScenarioBSwitchesOnce) {
  const Scenario sc = scenario("scenario_switch");
  const EpisodeResult r = trial0(sc);
  EXPECT_EQ(r.outcome, "goal_reached");
  const auto switches = r.log.events("mode_switch");
  ASSERT_EQ(switches.size(), 1u);
  EXPECT_EQ(switches[0]->t, 30.0);
  const auto& old = switches[0]->detail.at("old_plan");
  EXPECT_NEAR(spec_robustness(old, "low_battery/rule2"), -0.8, 1e-9);

  std::size_t replans_after = 0;
  for (const auto* e : r.log.events("replan")) replans_after += e->tick >= switches[0]->tick;
  EXPECT_GE(replans_after, 1u);

  const PlanRecord& post = r.plans.back();
  ASSERT_EQ(post.mode, "low_battery");
  ASSERT_TRUE(post.report.accepted);
  traces::TraceOptions o = sc.signals;
  o.dt = sc.dt;
  const Trace tr = traces::derive_trace(post.path, *sc.world, o, post.previous);
  for (std::size_t k = 0; k < tr.size(); ++k) {
    ASSERT_GE(tr.value(traces::kColDist, k), 2.0) << k;
    ASSERT_LE(tr.value(traces::kColSpeed, k), 3.0) << k;
  }
  for (const auto* t : r.log.ticks())
    if (t->mode == "low_battery") ASSERT_LE(t->state.speed_kph, 3.0) << t->tick;
}

TEST(Episode, ScenarioCInjectedSpeedingIsCaught) {
  const Scenario sc = scenario("scenario_disturbance");
  const EpisodeResult r = trial0(sc);
  const auto v = r.log.events("violation");
  ASSERT_FALSE(v.empty());
  EXPECT_EQ(v[0]->tick, 10u);
  EXPECT_NEAR(v[0]->detail.at("robustness").get<double>(), -0.5, 1e-9);
  EXPECT_DOUBLE_EQ(r.trace.value(traces::kColSpeed, 10), 5.5);
  const auto replans = r.log.events("replan");
  ASSERT_FALSE(replans.empty());
  EXPECT_GE(replans[0]->tick, 10u);
  EXPECT_LE(replans[0]->tick, 11u);
  EXPECT_EQ(r.outcome, "goal_reached");
}

TEST(Episode, ZeroBudgetLogsNothing) {
  Scenario sc = scenario("scenario_normal");
  sc.tick_budget = 0;
  const EpisodeResult r = trial0(sc);
  EXPECT_TRUE(r.log.records.empty());
  EXPECT_EQ(r.log.header.start.position, sc.start);
  EXPECT_EQ(r.outcome, "budget_exhausted");
}

TEST(Episode, BudgetExhaustion) {
  Scenario sc = scenario("scenario_normal");
  sc.tick_budget = 20;
  const EpisodeResult r = trial0(sc);
  EXPECT_EQ(r.outcome, "budget_exhausted");
  EXPECT_EQ(r.log.ticks().size(), 20u);
  EXPECT_EQ(r.log.outcome(), "budget_exhausted");
}

TEST(EpisodeProperty, ReplanCausalityAndLogCompleteness) {
  for (const char* name : {"scenario_normal", "scenario_switch", "scenario_disturbance"}) {
    const Scenario sc = scenario(name);
    for (std::uint64_t trial = 0; trial < 2; ++trial) {
      const EpisodeResult r = run_episode(sc, {derive_seed(sc.seed, trial), std::nullopt});
      // Every replan follows a violation or a mode switch since the previous plan.
      std::size_t last_plan_tick = 0;
      bool cause = false;
      for (const auto& rec : r.log.records) {
        const auto* e = std::get_if<EventRecord>(&rec);
        if (!e) continue;
        if (e->type == "violation" || e->type == "mode_switch") cause = true;
        if (e->type == "replan") {
          EXPECT_TRUE(cause) << name << " replan at " << e->tick;
          EXPECT_GE(e->tick, last_plan_tick);
          last_plan_tick = e->tick;
          cause = false;
        }
      }
      // One state row per elapsed tick, verdicts name declared specs.
      std::set<std::string> ids;
      for (const auto& m : r.log.header.modes)
        for (const auto& s : m.specs) ids.insert(s.first);
      const auto ticks = r.log.ticks();
      for (std::size_t k = 0; k < ticks.size(); ++k) {
        ASSERT_EQ(ticks[k]->tick, k);
        ASSERT_DOUBLE_EQ(ticks[k]->t, static_cast<double>(k) * sc.dt);
        for (const auto& v : ticks[k]->verdicts) ASSERT_TRUE(ids.count(v.spec)) << v.spec;
      }
      EXPECT_EQ(ticks.size(), r.trace.size());
      for (const auto* e : r.log.events()) EXPECT_LT(e->tick, std::max<std::size_t>(ticks.size(), 1));
    }
  }
}

TEST(EpisodeProperty, LowBatteryPlansAlsoMeetNormalRules) {
  const Scenario sc = scenario("scenario_switch");
  const EpisodeResult r = trial0(sc);
  std::vector<planner::HardSpec> weaker;
  for (const auto& s : hard_specs(sc.mode("normal")))
    if (s.id == "normal/rule1" || s.id == "normal/rule2" || s.id == "normal/rule3") weaker.push_back(s);
  ASSERT_EQ(weaker.size(), 3u);
  traces::TraceOptions o = sc.signals;
  o.dt = sc.dt;
  std::size_t checked = 0;
  for (const auto& p : r.plans) {
    if (p.mode != "low_battery") continue;
    ++checked;
    const auto rep = planner::screen_plan(p.path, weaker, *sc.world, o, sc.eval, p.previous);
    EXPECT_TRUE(rep.accepted) << "plan at tick " << p.tick;
  }
  EXPECT_GE(checked, 1u);
}

TEST(SwitchMode, IdenticalProfileIsIdempotent) {
  const Scenario sc = scenario("scenario_normal");
  const ModeProfile p = make_profile(sc, "normal");
  const ReplanRequest req{sc.start, 0.0, 0, std::nullopt, 5};
  const auto a = switch_mode(sc, p, req, map_seed(1));
  const auto b = switch_mode(sc, p, req, map_seed(1));
  EXPECT_EQ(a.maps.planning.cost.data(), b.maps.planning.cost.data());
  EXPECT_EQ(a.maps.base.cost.data(), b.maps.base.cost.data());
  EXPECT_TRUE(a.plan.report.accepted);
  EXPECT_TRUE(a.plan.path == b.plan.path);
}

TEST(SwitchMode, LowBatteryWidensForbiddenBand) {
  const Scenario sc = scenario("scenario_normal");
  const auto n = mode_cost_map(*sc.world, make_profile(sc, "normal"), sc.segmentation, 1, sc.planner.obstacle_cost);
  const auto l =
      mode_cost_map(*sc.world, make_profile(sc, "low_battery"), sc.segmentation, 1, sc.planner.obstacle_cost);
  EXPECT_GT(semantic::count_forbidden(l.planning), semantic::count_forbidden(n.planning));
}

TEST(SwitchMode, MidSidewalkExitsWithinThreeSeconds) {
  const Scenario sc = scenario("scenario_normal");
  const Vec2 on_sidewalk{40.0, 31.0};
  const auto& w = *sc.world;
  ASSERT_EQ(w.labels()[w.label_at(w.frame().cell_of(on_sidewalk))], "sidewalk");
  const ReplanRequest req{on_sidewalk, 30.0, 1, Vec2{39.0, 31.0}, 11};
  const auto r = switch_mode(sc, make_profile(sc, "low_battery"), req, map_seed(3));
  ASSERT_TRUE(r.plan.report.accepted);
  traces::TraceOptions o = sc.signals;
  o.dt = sc.dt;
  const Trace tr = traces::derive_trace(r.plan.path, w, o, req.previous);
  const auto side = *tr.schema().find("status_sidewalk");
  ASSERT_EQ(tr.value(side, 0), 1.0);
  std::size_t k = 0;
  while (k < tr.size() && tr.value(side, k) > 0) ++k;
  ASSERT_LT(k, tr.size());
  EXPECT_LE(tr.time(k) - tr.time(0), 3.0);
}
