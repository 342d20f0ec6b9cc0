#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "nmpfunnel/io.hpp"
#include "nmpfunnel/sim.hpp"

using namespace nmpfunnel;

namespace {

ScenarioConfig zero_scenario(Mode mode) {
  ScenarioConfig cfg = ScenarioConfig::case_study(mode);
  cfg.ref = {0.0, 0.0, 0.0, 3.0};
  cfg.disturbance = {0.0, 0.0, 0.0, 0.0};
  return cfg;
}

// Shared case-study runs; the hg run is the expensive one.
const CaseStudyResult& case_study() {
  static const CaseStudyResult r = run_case_study(ScenarioConfig{});
  return r;
}

}  // namespace

TEST(Disturbance, Examples) {
  const DisturbanceSpec d{};
  EXPECT_DOUBLE_EQ(disturbance(d, 0.0), 0.2);
  for (double t = 0.0; t < 10.0; t += 0.01) EXPECT_LE(std::abs(disturbance(d, t)), 0.3);
  const DisturbanceSpec none{0, 5, 0, 8};
  for (double t = 0.0; t < 3.0; t += 0.1) EXPECT_EQ(disturbance(none, t), 0.0);
}

TEST(ScenarioConfig, Validation) {
  ScenarioConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.params.s = 0.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = ScenarioConfig{};
  cfg.integrator.rel_tol = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = ScenarioConfig{};
  cfg.t_end = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = ScenarioConfig{};
  cfg.funnels[1].eps = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(parse_mode("pid"), ConfigError);
  EXPECT_EQ(parse_mode("hg"), Mode::hg);
}

TEST(ClosedLoopRhs, EquilibriumIsAtRest) {
  for (Mode mode : {Mode::lin, Mode::hg}) {
    const ClosedLoop loop(zero_scenario(mode));
    const ClosedLoopState d = closed_loop_rhs(loop, 0.0, loop.initial_state());
    EXPECT_EQ(d.plant, PlantState{});
    if (mode == Mode::hg) {
      ASSERT_TRUE(d.zeta.has_value());
      EXPECT_EQ(d.zeta->zeta1, 0.0);
      EXPECT_EQ(d.zeta->zeta2, 0.0);
      EXPECT_EQ(d.zeta->zeta3, 0.0);
    }
  }
}

TEST(ClosedLoopRhs, CaseStudyInitialInput) {
  for (Mode mode : {Mode::lin, Mode::hg}) {
    const ClosedLoop loop(ScenarioConfig::case_study(mode));
    const ClosedLoopState s0 = loop.initial_state();
    const auto ctl = loop.control(0.0, s0);
    EXPECT_TRUE(std::isfinite(ctl.cascade.u));
    EXPECT_LT(std::abs(ctl.cascade.u), 100.0);
    // e0(0) = -ybar_ref(0) and it starts inside the funnel.
    EXPECT_NEAR(ctl.cascade.e0, -loop.context().reference->initial_value(), 1e-15);
    EXPECT_LT(phi_eval(loop.config().funnels[0], 0.0).phi * std::abs(ctl.cascade.e0), 1.0);
  }
}

TEST(ClosedLoopRhs, ObserverWithExactDerivativesMatchesLin) {
  const ClosedLoop lin(ScenarioConfig::case_study(Mode::lin));
  const ClosedLoop hg(ScenarioConfig::case_study(Mode::hg));
  for (std::size_t i : {0u, 400u, 1300u, 2900u}) {
    const TrajectoryRow& row = case_study().lin.rows[i];
    const YNewLadder y = ynew_derivatives(lin.config().params, lin.context().lin, row.x);
    const double ul = lin.control(row.t, {row.x, std::nullopt}).cascade.u;
    const double uh = hg.control(row.t, {row.x, ObserverState{y.y_new, y.y_new_1, y.y_new_2}}).cascade.u;
    EXPECT_NEAR(ul, uh, 1e-10) << row.t;
    EXPECT_EQ(ul, row.c.u);
  }
}

TEST(Integrate, ZeroScenario) {
  for (Mode mode : {Mode::lin, Mode::hg}) {
    const Trajectory traj = integrate(zero_scenario(mode));
    ASSERT_EQ(traj.rows.size(), 3001u);
    for (const auto& r : traj.rows) {
      for (double v : r.x.to_array()) ASSERT_LE(std::abs(v), 1e-10);
      ASSERT_EQ(r.c.u, 0.0);
      ASSERT_EQ(r.c.k0, 1.0);
      ASSERT_EQ(r.c.k1, 1.0);
      ASSERT_EQ(r.c.k2, 1.0);
    }
  }
}

TEST(Integrate, SampleGrid) {
  const Trajectory& traj = case_study().lin;
  ASSERT_EQ(traj.rows.size(), 3001u);
  for (std::size_t i = 1; i < traj.rows.size(); ++i) ASSERT_GT(traj.rows[i].t, traj.rows[i - 1].t);
  EXPECT_EQ(traj.rows.front().t, 0.0);
  EXPECT_DOUBLE_EQ(traj.rows.back().t, 3.0);
}

TEST(Integrate, CaseStudyFunnelAndDomain) {
  const auto& r = case_study();
  for (const Summary* s : {&r.lin_summary, &r.hg_summary}) {
    EXPECT_TRUE(s->funnel_invariant) << to_string(s->mode);
    EXPECT_TRUE(s->domain_invariant) << to_string(s->mode);
    EXPECT_LT(s->max_abs_beta, std::acos(2.0 / 3.0));
    EXPECT_LE(s->final_tracking_error, 0.1);
    EXPECT_LT(s->max_abs_u, 1e3);
  }
}

TEST(Integrate, RowsAreConsistent) {
  const auto& traj = case_study().hg;
  for (std::size_t i = 0; i < traj.rows.size(); i += 97) {
    const auto& r = traj.rows[i];
    EXPECT_NEAR(r.c.e0, r.y_new - r.y_bar_ref, 1e-12);
    EXPECT_NEAR(r.y, r.x.alpha + 0.5 * r.x.beta, 1e-15);
    ASSERT_TRUE(r.zeta.has_value());
    EXPECT_TRUE(std::isfinite(r.zeta->zeta3));
  }
}

// Values frozen from the first validated run (rel_tol 1e-9, abs_tol 1e-12).
TEST(Integrate, CaseStudyRegression) {
  const auto& r = case_study();
  EXPECT_NEAR(r.lin_summary.y_final, 0.81147546, 1e-6);
  EXPECT_NEAR(r.hg_summary.y_final, 0.78934955, 1e-6);
  EXPECT_NEAR(r.lin_summary.max_funnel_ratio[1], 0.93576401, 1e-6);
  EXPECT_NEAR(r.hg_summary.max_funnel_ratio[1], 0.95413057, 1e-6);
  EXPECT_NEAR(r.max_input_difference_after_transient, 1.83176, 1e-4);
}

TEST(Integrate, RobustWithoutDisturbance) {
  ScenarioConfig cfg;
  cfg.disturbance = {0, 0, 0, 0};
  const CaseStudyResult r = run_case_study(cfg);
  for (const Summary* s : {&r.lin_summary, &r.hg_summary}) {
    EXPECT_TRUE(s->funnel_invariant);
    EXPECT_TRUE(s->domain_invariant);
    EXPECT_LE(s->final_tracking_error, 0.1);
  }
}

TEST(Integrate, Deterministic) {
  ScenarioConfig cfg = ScenarioConfig::case_study(Mode::lin);
  EXPECT_EQ(to_csv(integrate(cfg)), to_csv(integrate(cfg)));
}

TEST(Integrate, ToleranceConvergence) {
  ScenarioConfig a = ScenarioConfig::case_study(Mode::lin);
  ScenarioConfig b = a;
  b.integrator.rel_tol = a.integrator.rel_tol / 2.0;
  const auto xa = integrate(a).rows.back().x.to_array();
  const auto xb = integrate(b).rows.back().x.to_array();
  for (int k = 0; k < 4; ++k)
    EXPECT_LE(std::abs(xa[k] - xb[k]), 10.0 * b.integrator.rel_tol * std::max(1.0, std::abs(xb[k])));
}

// eps of the top funnel only matters for t >> 3 s; narrowing through a is
// what makes e2(0) infeasible.
TEST(Integrate, NarrowTopFunnelIsReportedAsViolation) {
  ScenarioConfig cfg = ScenarioConfig::case_study(Mode::lin);
  cfg.funnels[2].a = 0.2;
  try {
    integrate(cfg);
    FAIL() << "expected a funnel violation";
  } catch (const SimulationError& e) {
    EXPECT_EQ(e.kind(), FailureKind::funnel_violation);
    for (double v : e.state()) EXPECT_TRUE(std::isfinite(v));
    EXPECT_GE(e.t(), 0.0);
  }
}

TEST(Integrate, FastShrinkingFunnelFailsCleanly) {
  // The controller keeps phi0 |e0| < 1 by driving its gain up until the
  // step size underflows; this must surface as an integrator failure.
  ScenarioConfig cfg = ScenarioConfig::case_study(Mode::lin);
  cfg.funnels[0].b = 8.0;
  try {
    integrate(cfg);
    FAIL() << "expected an integrator failure";
  } catch (const SimulationError& e) {
    EXPECT_EQ(e.kind(), FailureKind::integrator_failure);
    EXPECT_GT(e.t(), 0.0);
    for (double v : e.state()) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(Integrate, InfeasibleStartIsRejected) {
  ScenarioConfig cfg = ScenarioConfig::case_study(Mode::hg);
  cfg.x0.alpha = 1.0;  // e0(0) far outside the initial funnel
  try {
    integrate(cfg);
    FAIL() << "expected a funnel violation";
  } catch (const SimulationError& e) {
    EXPECT_EQ(e.kind(), FailureKind::funnel_violation);
    EXPECT_EQ(e.t(), 0.0);
  }
}

TEST(Integrate, StartOutsideDomain) {
  ScenarioConfig cfg = ScenarioConfig::case_study(Mode::lin);
  cfg.x0.beta = 1.0;
  try {
    integrate(cfg);
    FAIL() << "expected a domain exit";
  } catch (const SimulationError& e) {
    EXPECT_EQ(e.kind(), FailureKind::domain_exit);
  }
}

TEST(Integrate, ShortHorizonEndsOffGrid) {
  ScenarioConfig cfg = ScenarioConfig::case_study(Mode::lin);
  cfg.t_end = 0.0105;
  const Trajectory traj = integrate(cfg);
  ASSERT_EQ(traj.rows.size(), 12u);
  EXPECT_DOUBLE_EQ(traj.rows.back().t, 0.0105);
}
