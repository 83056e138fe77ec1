#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "pgne/dynamics.hpp"
#include "pgne/game.hpp"

namespace pgne {

/// Deterministic uniform draws on top of std::mt19937_64, mapped by hand so
/// results do not depend on the standard library's distributions.
class UniformSource {
 public:
  explicit UniformSource(std::uint64_t seed);
  double next();                    // [0, 1)
  double next(double lo, double hi);  // [lo, hi)

 private:
  std::mt19937_64 engine_;
};

/// Symmetrizes M and shifts it by (|lambda_min| + 0.1) I when it is not
/// positive definite.
Matrix condition_positive_definite(const Matrix& raw);

/// Two players, scalar actions, J1 = x1 x2 + r x1^2 / 2, J2 = -x1 x2 + r x2^2 / 2.
/// r = 0 gives F(x) = (x2, -x1).
Game make_zero_sum_example(double regularization = 0.0);

struct CournotData {
  static constexpr int kFirms = 5;
  static constexpr int kMarkets = 4;
  std::vector<std::vector<int>> markets;  // markets joined by each firm
  std::vector<Matrix> A;                  // kMarkets x n_i selectors
  std::vector<Matrix> Q;
  std::vector<Vector> q;
  std::vector<Vector> r;  // per-firm market capacity share
  std::vector<Vector> u;  // production caps
  Vector P_bar;
  Matrix Xi;
};

struct CournotInstance {
  Game game;
  CournotData data;
};

/// Five firms over four markets. Coupled rows: market capacities followed by
/// the padded box rows x^i - u_i and -x^i.
CournotInstance make_cournot(std::uint64_t seed);

/// Six planar sensors with one coupled row (1/N) sum_i |x^i|^2 <= d.
Game make_sensor_network(std::uint64_t seed, double d = 6.0);

/// Two scalar players with F(x) = [[2, 1], [-1, 2]] x + (-4, 0) and no coupled
/// rows; meant for the local-set family on the box [0, 1]^2.
Game make_box_example();
Boxes box_example_bounds();

}  // namespace pgne
