#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>

#include "pgne/benchmarks.hpp"
#include "pgne/diagnostics.hpp"
#include "pgne/integrator.hpp"
#include "support/oracles.hpp"

namespace pgne {
namespace {

Dynamics gp(const Game& g) { return Dynamics({Family::kGp, g, GraphTopology::complete(g.num_players()), {}, {}}); }

// One scalar player with F(x) = x and the single row x - 1 <= 0. State (x, lam, z).
Game scalar_constrained() {
  return Game::quadratic("scalar", {1}, {Matrix::Identity(1, 1), Vector::Zero(1)},
                         LinearConstraints{{Matrix::Identity(1, 1)}, {Vector::Ones(1)}});
}

Dynamics example_pfc(double a) {
  return Dynamics({Family::kPfc, make_zero_sum_example(), GraphTopology::complete(2),
                   {{pfc_first_order(a, 1)}, {}, {}}, {}});
}

// Parallel block with A = +I: the compensator state grows without bound.
Dynamics unstable_pfc() {
  const Matrix I = Matrix::Identity(1, 1);
  return Dynamics::unchecked({Family::kPfc, make_zero_sum_example(), GraphTopology::complete(2),
                              {{make_lti_block_unchecked("unstable", I, I, I, Matrix::Zero(1, 1), I)}, {}, {}},
                              {}});
}

IntegratorConfig config(double h, double horizon, Scheme scheme = Scheme::kProjectedEuler) {
  IntegratorConfig c;
  c.h = h;
  c.horizon = horizon;
  c.scheme = scheme;
  return c;
}

// ---------------------------------------------------------------- step

TEST(Step, ZeroMultiplierWithNegativeDriftStaysAtZero) {
  const Dynamics d = gp(scalar_constrained());
  // x = 0 gives g = -1, so the multiplier pre-projection value is -1.
  for (double h : {1e-3, 0.1, 10.0}) {
    const Vector next = step(d, Vector{{0.0, 0.0, 0.0}}, h);
    EXPECT_EQ(next(1), 0.0);
  }
}

TEST(Step, InteriorMultiplierTakesAPlainEulerStep) {
  const Dynamics d = gp(scalar_constrained());
  const Vector next = step(d, Vector{{0.0, 1.0, 0.0}}, 0.1);
  EXPECT_DOUBLE_EQ(next(1), 0.9);
  EXPECT_DOUBLE_EQ(next(0), -0.1);  // x' = -(x + lambda)
}

TEST(Step, ZeroSumExampleFirstStep) {
  const Vector next = step(gp(make_zero_sum_example()), Vector{{1.0, 0.0}}, 1e-3);
  EXPECT_EQ(next, (Vector{{1.0, 0.001}}));
}

TEST(Step, RungeKuttaMatchesTheRotationToFifthOrderPerStep) {
  const double h = 1e-2;
  const Vector next = step(gp(make_zero_sum_example()), Vector{{1.0, 0.0}}, h, Scheme::kProjectedRk4);
  EXPECT_LT((next - testing::rotation_flow(Vector{{1.0, 0.0}}, h)).norm(), h * h * h * h * h);
}

TEST(Step, NonFiniteFieldIsADivergenceError) {
  Game::Definition def;
  def.name = "nan";
  def.action_dims = {1};
  def.gradient = [](int, const Vector&) { return Vector::Constant(1, std::numeric_limits<double>::quiet_NaN()); };
  const Dynamics d = gp(Game(def));
  try {
    step(d, Vector::Zero(1), 1e-3);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDivergence);
  }
  EXPECT_EQ(integrate(d, Vector::Zero(1), config(1e-3, 1.0)).reason, TerminalReason::kDivergence);
}

TEST(Step, RejectsNonpositiveStep) {
  EXPECT_THROW(step(gp(make_zero_sum_example()), Vector::Zero(2), 0.0), Error);
}

// ---------------------------------------------------------------- integrate

TEST(Integrate, FullRotationReturnsToTheStart) {
  const Trajectory t = integrate(gp(make_zero_sum_example()), Vector{{1.0, 0.0}},
                                 config(1e-4, 2.0 * std::numbers::pi));
  EXPECT_EQ(t.reason, TerminalReason::kHorizon);
  EXPECT_DOUBLE_EQ(t.final_time, 2.0 * std::numbers::pi);
  EXPECT_LT((t.final_state - Vector{{1.0, 0.0}}).norm(), 1e-3);
}

TEST(Integrate, EulerIteratesMatchTheClosedFormRecursion) {
  const Vector x0{{1.0, 0.0}};
  const Trajectory t = integrate(gp(make_zero_sum_example()), x0, config(1e-3, std::numbers::pi));
  EXPECT_LT((t.final_state - testing::rotation_euler(x0, t.h, t.steps)).norm(), 1e-12);
}

TEST(Integrate, EulerIsFirstOrderAgainstTheRotation) {
  const Vector x0{{1.0, 0.0}};
  const Vector exact = testing::rotation_flow(x0, std::numbers::pi);
  std::vector<double> errors;
  for (double h : {4e-3, 2e-3, 1e-3, 5e-4}) {
    const Trajectory t = integrate(gp(make_zero_sum_example()), x0, config(h, std::numbers::pi));
    errors.push_back((t.final_state - exact).norm());
  }
  for (std::size_t k = 1; k < errors.size(); ++k) {
    EXPECT_NEAR(errors[k - 1] / errors[k], 2.0, 0.05);
  }
}

TEST(Integrate, RungeKuttaIsFarMoreAccurateOnTheSmoothRotation) {
  const Trajectory t = integrate(gp(make_zero_sum_example()), Vector{{1.0, 0.0}},
                                 config(1e-2, 2.0 * std::numbers::pi, Scheme::kProjectedRk4));
  EXPECT_LT((t.final_state - Vector{{1.0, 0.0}}).norm(), 1e-8);
}

TEST(Integrate, IdenticalInputsGiveIdenticalTrajectories) {
  const Game g = make_cournot(42).game;
  CompensatorSet c0;
  for (int i = 0; i < 5; ++i) c0.x.push_back(pfc_first_order(1.0, g.action_dim(i)));
  const Dynamics d({Family::kPfc, g, GraphTopology::complete(5), c0, {}});
  IntegratorConfig c = config(1e-3, 0.5);
  c.record_stride = 7;
  Vector x0 = Vector::Constant(g.total_dim(), 0.2);
  const Trajectory a = integrate(d, d.initial_state(x0), c);
  const Trajectory b = integrate(d, d.initial_state(x0), c);
  ASSERT_EQ(a.states.size(), b.states.size());
  EXPECT_EQ(a.times, b.times);
  for (std::size_t k = 0; k < a.states.size(); ++k) {
    EXPECT_EQ(std::memcmp(a.states[k].data(), b.states[k].data(), sizeof(double) * a.states[k].size()), 0);
  }
}

TEST(Integrate, RecordedStatesStayInTheOrthantAndTimesAreEvenlySpaced) {
  const Game g = make_cournot(42).game;
  const Dynamics d = gp(g);
  IntegratorConfig c = config(5e-3, 3.0);
  c.record_stride = 3;
  const Trajectory t = integrate(d, d.initial_state(Vector::Zero(g.total_dim())), c);
  for (const Vector& s : t.states) {
    for (int k = 0; k < d.dim(); ++k) {
      if (d.layout().projected(k)) EXPECT_GE(s(k), -1e-12);
    }
  }
  for (std::size_t k = 1; k + 1 < t.times.size(); ++k) {
    EXPECT_NEAR(t.times[k] - t.times[k - 1], 3 * t.h, 1e-12);
  }
  EXPECT_GT(t.times.back(), t.times[t.times.size() - 2]);
  EXPECT_DOUBLE_EQ(t.times.back(), 3.0);
}

TEST(Integrate, StepIsShrunkSoTheLastStepLandsOnTheHorizon) {
  const Trajectory t = integrate(gp(make_zero_sum_example()), Vector{{1.0, 0.0}}, config(0.3, 1.0));
  EXPECT_EQ(t.steps, 4);
  EXPECT_DOUBLE_EQ(t.h, 0.25);
  EXPECT_EQ(t.times.back(), 1.0);
}

TEST(Integrate, ParallelCompensatorBreaksTheCycle) {
  const Dynamics d = example_pfc(1.0);
  const Trajectory t = integrate(d, d.initial_state(Vector{{1.0, 0.0}}), config(1e-3, 60.0));
  EXPECT_LT(d.outputs(t.final_state).x.norm(), 1e-4);
}

TEST(Integrate, UnstableCompensatorDiverges) {
  const Dynamics d = unstable_pfc();
  const Trajectory t = integrate(d, d.initial_state(Vector{{1.0, 0.0}}), config(1e-2, 200.0));
  EXPECT_EQ(t.reason, TerminalReason::kDivergence);
  EXPECT_LT(t.final_time, 200.0);
  EXPECT_LE(t.final_state.cwiseAbs().maxCoeff(), 1e12);
}

TEST(Integrate, StopRuleEndsOnceTheResidualStaysSmall) {
  const Dynamics d({Family::kOfc, make_zero_sum_example(), GraphTopology::complete(2),
                    {{ofc_heavy_anchor(1.0, 1.0, 1)}, {}, {}}, {}});
  IntegratorConfig c = config(1e-2, 500.0);
  c.stop_on = StopRule{1e-6, 100};
  const Trajectory t = integrate(d, d.initial_state(Vector{{1.0, 0.0}}), c, {}, make_residual_monitor(d));
  EXPECT_EQ(t.reason, TerminalReason::kResidual);
  EXPECT_LT(t.final_time, 500.0);
  ASSERT_TRUE(t.last_residual.has_value());
  EXPECT_LT(*t.last_residual, 1e-6);
  EXPECT_EQ(t.times.back(), t.final_time);
}

TEST(Integrate, StopRuleNeedsAResidual) {
  IntegratorConfig c = config(1e-2, 1.0);
  c.stop_on = StopRule{};
  EXPECT_THROW(integrate(gp(make_zero_sum_example()), Vector{{1.0, 0.0}}, c), Error);
}

TEST(Integrate, ProbesAreEvaluatedAtEveryRecord) {
  IntegratorConfig c = config(1e-2, 1.0);
  c.record_stride = 10;
  const Probe norm{"norm", [](double, const Vector& s) { return s.norm(); }};
  const Probe time{"time", [](double t, const Vector&) { return t; }};
  const Trajectory t = integrate(gp(make_zero_sum_example()), Vector{{1.0, 0.0}}, c, {norm, time});
  EXPECT_EQ(t.probe_names, (std::vector<std::string>{"norm", "time"}));
  ASSERT_EQ(t.probe_values[0].size(), t.times.size());
  EXPECT_EQ(t.probe_values[1], t.times);
  for (std::size_t k = 0; k < t.times.size(); ++k) EXPECT_EQ(t.probe_values[0][k], t.states[k].norm());
}

TEST(Integrate, RejectsBadConfigurations) {
  const Dynamics d = gp(make_zero_sum_example());
  EXPECT_THROW(integrate(d, Vector{{1.0, 0.0}}, config(-1.0, 1.0)), Error);
  EXPECT_THROW(integrate(d, Vector{{1.0, 0.0}}, config(1.0, 0.5)), Error);
  IntegratorConfig c = config(0.1, 1.0);
  c.record_stride = 0;
  EXPECT_THROW(integrate(d, Vector{{1.0, 0.0}}, c), Error);
  const Dynamics constrained = gp(scalar_constrained());
  EXPECT_THROW(integrate(constrained, Vector{{0.0, -1.0, 0.0}}, config(0.1, 1.0)), Error);
}

TEST(Scheme, NamesRoundTrip) {
  for (Scheme s : {Scheme::kProjectedEuler, Scheme::kProjectedRk4}) EXPECT_EQ(scheme_from_string(to_string(s)), s);
  EXPECT_THROW(scheme_from_string("midpoint"), Error);
}

// ---------------------------------------------------------------- step guard

TEST(GuardedStep, LeavesSmallStepsAlone) {
  const GuardedStep g = guarded_step(gp(make_zero_sum_example()), 0.5);
  EXPECT_EQ(g.h, 0.5);
  EXPECT_TRUE(g.notes.empty());
}

TEST(GuardedStep, CapsByTheLaplacianSpectralRadius) {
  // lambda_max of K5 is 5.
  const GuardedStep g = guarded_step(gp(make_cournot(42).game), 1.0);
  EXPECT_NEAR(g.h, 0.1, 1e-12);
  EXPECT_EQ(g.notes.size(), 1u);
}

TEST(GuardedStep, CapsStiffGames) {
  const Game stiff = Game::quadratic("stiff", {1, 1}, {5000.0 * Matrix::Identity(2, 2), Vector::Zero(2)});
  const GuardedStep g = guarded_step(gp(stiff), 1e-3);
  EXPECT_NEAR(g.h, 2e-5, 1e-15);
  ASSERT_EQ(g.notes.size(), 1u);
  EXPECT_NE(g.notes[0].find("Lipschitz"), std::string::npos);
}

}  // namespace
}  // namespace pgne
