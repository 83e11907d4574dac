#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace safenav;
using namespace safenav::stl;
using testsupport::abp_schema;

namespace {

SignalSchema one(const std::string& name, const std::string& unit) {
  SignalSchema s;
  s.add({name, SignalKind::Real, unit});
  return s;
}

}  // namespace

TEST(Monitor, SpeedExcursionIsViolated) {
  const auto s = one("speed", "kph");
  OnlineMonitor m(parse_formula("G[0,inf](speed < 5kph)", s), s, 0.5);
  m.step({0.0, {3.0}});
  m.step({0.5, {4.0}});
  EXPECT_EQ(m.verdict().status, Status::Inconclusive);
  const Verdict v = m.step({1.0, {5.5}});
  EXPECT_EQ(v.status, Status::Violated);
  EXPECT_DOUBLE_EQ(v.robustness, -0.5);
  EXPECT_EQ(m.new_violations(), 1u);
  ASSERT_TRUE(v.decided_at.has_value());
  EXPECT_DOUBLE_EQ(*v.decided_at, 1.0);
}

TEST(Monitor, ClearanceHeldStaysInconclusive) {
  const auto s = one("dist_o", "m");
  OnlineMonitor m(parse_formula("G[0,inf](dist_o >= 1m)", s), s, 0.5);
  for (int k = 0; k < 6; ++k) m.step({0.5 * k, {1.4}});
  EXPECT_EQ(m.verdict().status, Status::Inconclusive);
  EXPECT_NEAR(m.verdict().robustness, 0.4, 1e-12);
}

TEST(Monitor, NoSamples) {
  const auto s = one("speed", "kph");
  OnlineMonitor m(parse_formula("G[0,inf](speed < 5kph)", s), s, 0.5);
  EXPECT_EQ(m.verdict().status, Status::Inconclusive);
  EXPECT_EQ(m.verdict().robustness, kCap);
  EXPECT_EQ(m.finalize().robustness, kCap);
}

TEST(Monitor, ViolationIsSticky) {
  const auto s = one("speed", "kph");
  OnlineMonitor m(parse_formula("G[0,inf](speed < 5kph)", s), s, 0.5);
  m.step({0.0, {6.0}});
  EXPECT_EQ(m.new_violations(), 1u);
  m.step({0.5, {1.0}});
  EXPECT_EQ(m.verdict().status, Status::Violated);
  EXPECT_EQ(m.new_violations(), 0u);
  m.step({1.0, {7.0}});
  EXPECT_EQ(m.new_violations(), 1u);
  EXPECT_DOUBLE_EQ(m.verdict().robustness, -2.0);
}

TEST(Monitor, BoundedRingMemory) {
  SignalSchema s = abp_schema();
  OnlineMonitor m(parse_formula("G[0,inf](p -> F[0,5](a > 0))", s), s, 0.5);
  EXPECT_TRUE(m.safety_shaped());
  for (int k = 0; k < 200; ++k) m.step({0.5 * k, {1.0, 0.0, 1.0}});
  EXPECT_LE(m.buffered(), 11u);
}

TEST(Monitor, EarlyDetectionBeforeWindowCloses) {
  // Once no future sample can rescue an obligation it is reported at once.
  SignalSchema s = abp_schema();
  OnlineMonitor m(parse_formula("G[0,inf](G[0,2](a > 0))", s), s, 1.0);
  m.step({0.0, {1.0, 0.0, 1.0}});
  m.step({1.0, {-1.0, 0.0, 1.0}});
  EXPECT_EQ(m.verdict().status, Status::Violated);
}

TEST(Monitor, Errors) {
  const auto s = one("speed", "kph");
  OnlineMonitor m(parse_formula("G[0,inf](speed < 5kph)", s), s, 0.5);
  m.step({0.0, {1.0}});
  EXPECT_THROW(m.step({0.0, {1.0}}), MonitorError);
  EXPECT_THROW(m.step({1.5, {1.0}}), MonitorError);
  EXPECT_THROW(m.step({0.5, {1.0, 2.0}}), MonitorError);
  m.finalize();
  EXPECT_THROW(m.step({0.5, {1.0}}), MonitorError);
  EXPECT_THROW(OnlineMonitor(parse_formula("a > 0", abp_schema()), s, 0.5), MonitorError);
}

TEST(MonitorProperty, MonotoneRunningMinimum) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 6.0);
  const auto s = abp_schema();
  for (const char* text : {"G[0,inf](a < 4)", "G[0,inf](p)"}) {
    for (int trial = 0; trial < 50; ++trial) {
      OnlineMonitor m(parse_formula(text, s), s, 1.0);
      double margin_min = kCap, last = kCap;
      for (int k = 0; k < 40; ++k) {
        const double a = u(rng);
        const double p = u(rng) > 2.0 ? 1.0 : -1.0;
        const double margin = text[9] == 'a' ? 4.0 - a : p;
        margin_min = std::min(margin_min, margin);
        const Verdict v = m.step({static_cast<double>(k), {a, 0.0, p}});
        ASSERT_EQ(v.robustness, margin_min);
        ASSERT_LE(v.robustness, last);
        last = v.robustness;
      }
    }
  }
}

TEST(MonitorProperty, PrefixConsistencyWithOffline) {
  std::mt19937_64 rng(17);
  const auto s = abp_schema();
  for (int trial = 0; trial < 200; ++trial) {
    // Safety-shaped: G over a bounded body.
    const Formula body = testsupport::random_formula(rng, 2, 1.0);
    const Formula f = Formula::globally({0.0, kUnbounded}, body);
    const Trace tr = testsupport::random_trace(rng, 30, 1.0);
    OnlineMonitor m(f, s, 1.0);
    for (std::size_t k = 0; k < tr.size(); ++k) m.step(tr.sample(k));
    const Verdict on = m.finalize();
    const Verdict off = evaluate_offline(f, tr);
    ASSERT_DOUBLE_EQ(on.robustness, off.robustness) << to_string(f);
    ASSERT_EQ(on.status, off.status) << to_string(f);
  }
}

TEST(MonitorProperty, RunningValueMatchesOfflineOnceObligationsExpire) {
  std::mt19937_64 rng(23);
  const auto s = abp_schema();
  for (int trial = 0; trial < 100; ++trial) {
    const Formula f = Formula::globally({0.0, kUnbounded}, testsupport::random_formula(rng, 2, 1.0));
    const auto h = horizon_samples(f.child(), 1.0);
    ASSERT_TRUE(h.has_value());
    const Trace tr = testsupport::random_trace(rng, 30, 1.0);
    OnlineMonitor m(f, s, 1.0);
    for (std::size_t k = 0; k < tr.size(); ++k) {
      const Verdict v = m.step(tr.sample(k));
      if (k < *h) continue;
      // Every instant up to k - h is settled; compare against the offline min over them.
      const auto body = robustness_signal(f.child(), tr.slice(0, k + 1));
      double settled = kCap;
      for (std::size_t j = 0; j + *h <= k; ++j) settled = std::min(settled, body[j]);
      ASSERT_LE(v.robustness, settled + 1e-12);
    }
  }
}

TEST(MonitorProperty, GenericFormulaFinalizesToOffline) {
  std::mt19937_64 rng(29);
  const auto s = abp_schema();
  for (int trial = 0; trial < 100; ++trial) {
    const Formula f = testsupport::random_formula(rng, 3, 1.0);
    const Trace tr = testsupport::random_trace(rng, 20, 1.0);
    OnlineMonitor m(f, s, 1.0);
    for (std::size_t k = 0; k < tr.size(); ++k) m.step(tr.sample(k));
    const Verdict on = m.finalize();
    const Verdict off = evaluate_offline(f, tr);
    ASSERT_DOUBLE_EQ(on.robustness, off.robustness) << to_string(f);
  }
}

TEST(MonitorProperty, SettledInstantsCoverTheTrace) {
  std::mt19937_64 rng(31);
  const auto s = abp_schema();
  const Formula f = parse_formula("G[0,inf](p -> F[0,3](a > 0))", s);
  const Trace tr = testsupport::random_trace(rng, 40, 1.0);
  OnlineMonitor m(f, s, 1.0);
  std::vector<std::size_t> seen;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    m.step(tr.sample(k));
    for (const auto& i : m.settled()) seen.push_back(i.index);
  }
  m.finalize();
  for (const auto& i : m.settled()) seen.push_back(i.index);
  ASSERT_EQ(seen.size(), tr.size());
  const auto body = robustness_signal(f.child(), tr);
  for (std::size_t k = 0; k < seen.size(); ++k) EXPECT_EQ(seen[k], k);
  OnlineMonitor again(f, s, 1.0);
  for (std::size_t k = 0; k < tr.size(); ++k) {
    again.step(tr.sample(k));
    for (const auto& i : again.settled()) EXPECT_DOUBLE_EQ(i.value, body[i.index]);
  }
}
