#include <gtest/gtest.h>

#include <random>

#include <Eigen/Eigenvalues>

#include "pgne/benchmarks.hpp"
#include "support/oracles.hpp"

namespace pgne {
namespace {

double min_eig(const Matrix& M) {
  return Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (M + M.transpose())).eigenvalues().minCoeff();
}

TEST(UniformSource, DeterministicAndInRange) {
  UniformSource a(7), b(7), c(8);
  bool differs = false;
  for (int k = 0; k < 10000; ++k) {
    const double u = a.next();
    EXPECT_EQ(u, b.next());
    differs |= u != c.next();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
  EXPECT_TRUE(differs);
  UniformSource d(1);
  for (int k = 0; k < 1000; ++k) {
    const double v = d.next(-6.0, 6.0);
    EXPECT_GE(v, -6.0);
    EXPECT_LT(v, 6.0);
  }
}

TEST(Conditioning, DefiniteInputIsOnlySymmetrized) {
  const Matrix raw{{2.0, 1.0}, {0.0, 2.0}};
  EXPECT_EQ(condition_positive_definite(raw), (Matrix{{2.0, 0.5}, {0.5, 2.0}}));
}

TEST(Conditioning, IndefiniteInputIsShiftedToMinimumEigenvalueOneTenth) {
  const Matrix raw{{1.0, 3.0}, {3.0, 1.0}};  // eigenvalues -2 and 4
  const Matrix M = condition_positive_definite(raw);
  EXPECT_NEAR(min_eig(M), 0.1, 1e-12);
  EXPECT_EQ(M, M.transpose());
}

TEST(Conditioning, RandomDrawsBecomePositiveDefinite) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix raw = testing::random_vector(rng, 16, -6.0, 6.0).reshaped(4, 4);
    EXPECT_GT(min_eig(condition_positive_definite(raw)), 0.0);
  }
}

TEST(ZeroSumExample, StructureAndRegularization) {
  const Game g = make_zero_sum_example();
  EXPECT_EQ(g.num_players(), 2);
  EXPECT_EQ(g.total_dim(), 2);
  EXPECT_EQ(g.num_rows(), 0);
  EXPECT_EQ(g.affine_gradient()->M, (Matrix{{0.0, 1.0}, {-1.0, 0.0}}));
  EXPECT_EQ(g.cost(0, Vector{{2.0, 3.0}}), 6.0);
  EXPECT_EQ(g.cost(1, Vector{{2.0, 3.0}}), -6.0);
  EXPECT_EQ(make_zero_sum_example(0.5).affine_gradient()->M, (Matrix{{0.5, 1.0}, {-1.0, 0.5}}));
}

TEST(Cournot, SameSeedGivesIdenticalGames) {
  const CournotInstance a = make_cournot(42), b = make_cournot(42);
  EXPECT_EQ(a.game.action_dims(), b.game.action_dims());
  EXPECT_EQ(a.game.affine_gradient()->M, b.game.affine_gradient()->M);
  EXPECT_EQ(a.game.affine_gradient()->c, b.game.affine_gradient()->c);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(a.game.linear_constraints()->A[i], b.game.linear_constraints()->A[i]);
    EXPECT_EQ(a.game.linear_constraints()->b[i], b.game.linear_constraints()->b[i]);
  }
  EXPECT_EQ(a.data.markets, b.data.markets);
  EXPECT_EQ(a.data.Xi, b.data.Xi);
  EXPECT_NE(make_cournot(43).game.affine_gradient()->c, a.game.affine_gradient()->c);
}

TEST(Cournot, DataRespectsTheDrawRanges) {
  for (std::uint64_t seed : {1u, 42u, 2024u}) {
    const CournotData d = make_cournot(seed).data;
    EXPECT_GT(min_eig(d.Xi), 0.0);
    for (int k = 0; k < CournotData::kMarkets; ++k) {
      EXPECT_GE(d.P_bar(k), 10.0);
      EXPECT_LT(d.P_bar(k), 14.0);
    }
    for (int i = 0; i < CournotData::kFirms; ++i) {
      const int ni = static_cast<int>(d.markets[i].size());
      ASSERT_GE(ni, 1);
      EXPECT_EQ(d.Q[i], d.Q[i].transpose());
      EXPECT_GT(min_eig(d.Q[i]), 0.0);
      EXPECT_TRUE((d.q[i].array() >= 0.0).all() && (d.q[i].array() < 2.0).all());
      EXPECT_TRUE((d.r[i].array() >= 20.0).all() && (d.r[i].array() <= 30.0).all());
      EXPECT_TRUE((d.u[i].array() >= 6.0).all() && (d.u[i].array() <= 14.0).all());
      // Selector: one unit entry per column, in the joined market's row.
      EXPECT_EQ(d.A[i].rows(), CournotData::kMarkets);
      for (int j = 0; j < ni; ++j) {
        EXPECT_EQ(d.A[i].col(j).sum(), 1.0);
        EXPECT_EQ(d.A[i](d.markets[i][j], j), 1.0);
      }
    }
  }
}

TEST(Cournot, GradientMatchesTheCostDefinition) {
  const CournotInstance inst = make_cournot(42);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector x = testing::random_vector(rng, inst.game.total_dim(), 0.0, 6.0);
    for (int i = 0; i < 5; ++i) {
      EXPECT_LT((inst.game.player_gradient(i, x) - testing::fd_player_gradient(inst.game, i, x))
                    .cwiseAbs()
                    .maxCoeff(),
                1e-6);
    }
  }
}

TEST(Cournot, StronglyMonotoneWithAResidualFreeOracle) {
  const Game g = make_cournot(42).game;
  EXPECT_EQ(monotonicity_report(g, 2, 0).cls, MonotonicityClass::kStrongly);
  const KktPoint k = solve_gne_oracle(g);
  const Vector F = pseudo_gradient(g, k.x_star);
  const StackedConstraints G = stacked_constraints(g, k.x_star);
  EXPECT_LT((F + G.jacobian.transpose() * k.lambda_star).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Sensor, StructureAndBudgetRow) {
  const Game g = make_sensor_network(42);
  EXPECT_EQ(g.num_players(), 6);
  EXPECT_EQ(g.action_dims(), std::vector<int>(6, 2));
  EXPECT_EQ(g.num_rows(), 1);
  EXPECT_DOUBLE_EQ(aggregate_constraint(g, Vector::Zero(12))(0), -6.0);
  EXPECT_DOUBLE_EQ(aggregate_constraint(make_sensor_network(42, 0.5), Vector::Zero(12))(0), -0.5);
  EXPECT_THROW(make_sensor_network(42, 0.0), Error);
}

TEST(Sensor, StronglyMonotoneByConstruction) {
  for (std::uint64_t seed : {1u, 42u, 7u}) {
    const MonotonicityReport r = monotonicity_report(make_sensor_network(seed), 2, 0);
    EXPECT_EQ(r.cls, MonotonicityClass::kStrongly);
    EXPECT_GT(r.mu, 0.0);
  }
}

TEST(Sensor, DeterministicInTheSeed) {
  EXPECT_EQ(make_sensor_network(5).affine_gradient()->c, make_sensor_network(5).affine_gradient()->c);
  EXPECT_NE(make_sensor_network(5).affine_gradient()->c, make_sensor_network(6).affine_gradient()->c);
}

TEST(BoxExample, DataAndBounds) {
  const Game g = make_box_example();
  EXPECT_EQ(g.affine_gradient()->M, (Matrix{{2.0, 1.0}, {-1.0, 2.0}}));
  EXPECT_EQ(g.affine_gradient()->c, (Vector{{-4.0, 0.0}}));
  const Boxes b = box_example_bounds();
  EXPECT_EQ(b.lower, Vector::Zero(2));
  EXPECT_EQ(b.upper, Vector::Ones(2));
}

TEST(BoxOracle, AgreesWithEnumeration) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 4;
    Matrix M = testing::random_vector(rng, n * n, -2.0, 2.0).reshaped(n, n);
    M += (std::abs(min_eig(M)) + 0.2) * Matrix::Identity(n, n);  // strongly monotone
    const Vector c = testing::random_vector(rng, n, -3.0, 3.0);
    const Vector lo = testing::random_vector(rng, n, -1.5, 0.0);
    const Vector hi = lo + testing::random_vector(rng, n, 0.1, 2.0);
    const Game g = Game::quadratic("random", std::vector<int>(n, 1), {M, c});
    const auto expected = testing::box_equilibrium(M, c, lo, hi);
    ASSERT_TRUE(expected.has_value());
    EXPECT_LT((solve_box_oracle(g, lo, hi).x_star - *expected).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(BoxOracle, BoxExampleAndInapplicableGames) {
  const Boxes b = box_example_bounds();
  EXPECT_LT((solve_box_oracle(make_box_example(), b.lower, b.upper).x_star - Vector{{1.0, 0.5}}).norm(),
            1e-14);
  EXPECT_THROW(solve_box_oracle(make_zero_sum_example(), b.lower, b.upper), Error);
  EXPECT_THROW(solve_box_oracle(make_sensor_network(42), Vector::Zero(12), Vector::Ones(12)), Error);
}

}  // namespace
}  // namespace pgne
