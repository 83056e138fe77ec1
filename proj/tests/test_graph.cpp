#include <gtest/gtest.h>

#include <random>

#include "pgne/graph.hpp"
#include "support/oracles.hpp"

namespace pgne {
namespace {

TEST(Laplacian, PathOfThree) {
  const Matrix expected{{1, -1, 0}, {-1, 2, -1}, {0, -1, 1}};
  EXPECT_EQ(laplacian(GraphTopology::path(3)), expected);
}

TEST(Laplacian, SingleNodeIsZero) {
  EXPECT_EQ(laplacian(GraphTopology(1, {})), Matrix::Zero(1, 1));
}

TEST(Laplacian, CompleteGraphOfFour) {
  const Matrix L = laplacian(GraphTopology::complete(4));
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) EXPECT_EQ(L(i, j), i == j ? 3.0 : -1.0);
  }
}

TEST(Laplacian, GeneratedTopologiesAreSymmetricWithZeroRowSums) {
  for (const char* name : {"path", "cycle", "complete", "star"}) {
    for (int n = 2; n <= 8; ++n) {
      for (double w : {1.0, 0.5, 0.7}) {
        const Matrix L = GraphTopology::generate(name, n, w).laplacian();
        EXPECT_EQ(L, L.transpose()) << name;
        const Vector rows = L * Vector::Ones(n);
        // Dyadic weights sum without rounding; others within one ulp per term.
        if (w != 0.7) EXPECT_EQ(rows, Vector::Zero(n)) << name;
        else EXPECT_LT(rows.cwiseAbs().maxCoeff(), 1e-14) << name;
        EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(L).eigenvalues().minCoeff(), -1e-12);
      }
    }
  }
}

TEST(Laplacian, EdgeListWithWeights) {
  const GraphTopology g(3, {{0, 2, 2.5}});
  const Matrix expected{{2.5, 0, -2.5}, {0, 0, 0}, {-2.5, 0, 2.5}};
  EXPECT_EQ(g.laplacian(), expected);
}

TEST(Laplacian, InvalidEdgesAreRejected) {
  EXPECT_THROW(GraphTopology(3, {{1, 1, 1.0}}), Error);
  EXPECT_THROW(GraphTopology(3, {{0, 3, 1.0}}), Error);
  EXPECT_THROW(GraphTopology(3, {{0, 1, -1.0}}), Error);
  EXPECT_THROW(GraphTopology::generate("wheel", 4), Error);
}

TEST(KronLift, UnitDimensionLeavesLUnchanged) {
  const Matrix L = GraphTopology::cycle(5).laplacian();
  EXPECT_EQ(kron_lift(L, 1), L);
}

TEST(KronLift, ConsensusVectorIsInTheKernel) {
  const Matrix L = GraphTopology::path(3).laplacian();
  const Vector v = Vector{{5.0, 7.0}}.replicate(3, 1);
  EXPECT_EQ(kron_lift(L, 2) * v, Vector::Zero(6));
  EXPECT_EQ(apply_kron(L, 2, v), Vector::Zero(6));
}

TEST(KronLift, PathOfThreeOnFirstAgent) {
  const Matrix L = GraphTopology::path(3).laplacian();
  const Vector v{{1, 0, 0, 0, 0, 0}};
  const Vector expected{{1, 0, -1, 0, 0, 0}};
  EXPECT_EQ(kron_lift(L, 2) * v, expected);
  EXPECT_EQ(apply_kron(L, 2, v), expected);
}

TEST(KronLift, KernelHoldsForRandomBlocks) {
  std::mt19937_64 rng(1);
  for (const char* name : {"path", "cycle", "complete", "star"}) {
    const Matrix L = GraphTopology::generate(name, 6, 1.3).laplacian();
    const Vector v = testing::random_vector(rng, 4, -10.0, 10.0);
    EXPECT_LT((kron_lift(L, 4) * v.replicate(6, 1)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(KronLift, MatrixFreeProductMatchesDenseLift) {
  std::mt19937_64 rng(2);
  const Matrix L = GraphTopology::star(5, 0.3).laplacian();
  const Vector v = testing::random_vector(rng, 15);
  EXPECT_LT((kron_lift(L, 3) * v - apply_kron(L, 3, v)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Fiedler, PathOfThree) {
  const Connectivity c = connectivity_and_fiedler(GraphTopology::path(3));
  EXPECT_TRUE(c.connected);
  EXPECT_NEAR(c.lambda2, 1.0, 1e-12);
}

TEST(Fiedler, TwoDisconnectedNodes) {
  const Connectivity c = connectivity_and_fiedler(GraphTopology(2, {}));
  EXPECT_FALSE(c.connected);
  EXPECT_NEAR(c.lambda2, 0.0, 1e-12);
}

TEST(Fiedler, CompleteGraphOfSix) {
  const Connectivity c = connectivity_and_fiedler(GraphTopology::complete(6));
  EXPECT_TRUE(c.connected);
  EXPECT_NEAR(c.lambda2, 6.0, 1e-12);
}

TEST(Fiedler, DoublingWeightsDoublesTheSpectrum) {
  for (const char* name : {"path", "cycle", "star"}) {
    const GraphTopology g = GraphTopology::generate(name, 7, 0.9);
    const Vector e1 = Eigen::SelfAdjointEigenSolver<Matrix>(g.laplacian()).eigenvalues();
    const Vector e2 = Eigen::SelfAdjointEigenSolver<Matrix>(g.scaled(2.0).laplacian()).eigenvalues();
    EXPECT_LT((e2 - 2.0 * e1).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(PartialInfoCondition, HoldsWithLargeFiedlerValue) {
  // lambda2 of K_10 is 10; threshold theta^2/mu + theta = 2.
  const PartialInfoReport r = check_partial_info_condition(GraphTopology::complete(10), 1.0, 1.0);
  EXPECT_TRUE(r.holds);
  EXPECT_NEAR(r.lambda2, 10.0, 1e-12);
  EXPECT_DOUBLE_EQ(r.threshold, 2.0);
  EXPECT_DOUBLE_EQ(r.suggested_scale, 1.0);
}

TEST(PartialInfoCondition, FailsAndSuggestsScale) {
  const PartialInfoReport r = check_partial_info_condition(GraphTopology::path(3), 1.0, 1.0);
  EXPECT_FALSE(r.holds);
  EXPECT_NEAR(r.suggested_scale, 2.2, 1e-12);
  const PartialInfoReport fixed =
      check_partial_info_condition(GraphTopology::path(3).scaled(r.suggested_scale), 1.0, 1.0);
  EXPECT_TRUE(fixed.holds);
}

TEST(PartialInfoCondition, NonpositiveModulusIsInapplicable) {
  try {
    check_partial_info_condition(GraphTopology::path(3), 1.0, 0.0);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInapplicable);
  }
}

}  // namespace
}  // namespace pgne
