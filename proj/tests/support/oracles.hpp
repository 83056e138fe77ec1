#pragma once

// Independent reference computations used only by the tests. Nothing here
// calls into the library's solvers; it only reads game evaluators.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "pgne/game.hpp"

namespace pgne::testing {

inline Vector random_vector(std::mt19937_64& rng, int n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (int k = 0; k < n; ++k) v(k) = u(rng);
  return v;
}

/// Central differences of player i's cost with respect to its own block.
inline Vector fd_player_gradient(const Game& game, int i, const Vector& x, double h = 1e-5) {
  const int o = game.offset(i), ni = game.action_dim(i);
  Vector g(ni);
  for (int k = 0; k < ni; ++k) {
    Vector xp = x, xm = x;
    xp(o + k) += h;
    xm(o + k) -= h;
    g(k) = (game.cost(i, xp) - game.cost(i, xm)) / (2.0 * h);
  }
  return g;
}

/// Central-difference Jacobian of a vector map.
inline Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x,
                          double h = 1e-6) {
  const Vector f0 = f(x);
  Matrix J(f0.size(), x.size());
  for (int k = 0; k < x.size(); ++k) {
    Vector xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    J.col(k) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return J;
}

/// Affine map recovered from an affine pseudo-gradient by differencing
/// (exact up to rounding for affine maps).
struct AffineFit {
  Matrix M;
  Vector c;
};

inline AffineFit fit_affine(const Game& game) {
  const int n = game.total_dim();
  const Vector zero = Vector::Zero(n);
  auto F = [&](const Vector& x) { return pseudo_gradient(game, x); };
  AffineFit fit;
  fit.c = F(zero);
  fit.M.resize(n, n);
  for (int k = 0; k < n; ++k) fit.M.col(k) = F(Vector::Unit(n, k)) - fit.c;
  return fit;
}

/// Closed-form solution of x' = (-x2, x1) from x0: rotation by angle t.
inline Vector rotation_flow(const Vector& x0, double t) {
  const double c = std::cos(t), s = std::sin(t);
  return Vector{{c * x0(0) - s * x0(1), s * x0(0) + c * x0(1)}};
}

/// Explicit Euler iterate (I + hJ)^k x0 for the same rotation field.
inline Vector rotation_euler(const Vector& x0, double h, long k) {
  Matrix step{{1.0, -h}, {h, 1.0}};
  Vector x = x0;
  for (long j = 0; j < k; ++j) x = step * x;
  return x;
}

/// Box-constrained Nash equilibrium of F(x) = M x + c by enumerating each
/// coordinate as pinned at its lower bound, pinned at its upper bound, or free
/// (3^n cases).
inline std::optional<Vector> box_equilibrium(const Matrix& M, const Vector& c,
                                             const Vector& lower, const Vector& upper) {
  const int n = static_cast<int>(c.size());
  long cases = 1;
  for (int k = 0; k < n; ++k) cases *= 3;
  for (long code = 0; code < cases; ++code) {
    std::vector<int> state(n);
    long rest = code;
    for (int k = 0; k < n; ++k) {
      state[k] = static_cast<int>(rest % 3);
      rest /= 3;
    }
    Vector x = Vector::Zero(n);
    std::vector<int> free_idx;
    for (int k = 0; k < n; ++k) {
      if (state[k] == 1) x(k) = lower(k);
      else if (state[k] == 2) x(k) = upper(k);
      else free_idx.push_back(k);
    }
    if (!free_idx.empty()) {
      const int f = static_cast<int>(free_idx.size());
      Matrix Mff(f, f);
      Vector rhs(f);
      for (int a = 0; a < f; ++a) {
        rhs(a) = -c(free_idx[a]);
        for (int k = 0; k < n; ++k) {
          if (state[k] != 0) rhs(a) -= M(free_idx[a], k) * x(k);
        }
        for (int b = 0; b < f; ++b) Mff(a, b) = M(free_idx[a], free_idx[b]);
      }
      const Vector sol = Mff.fullPivLu().solve(rhs);
      for (int a = 0; a < f; ++a) x(free_idx[a]) = sol(a);
    }
    const Vector g = M * x + c;
    bool ok = true;
    for (int k = 0; k < n && ok; ++k) {
      if (x(k) < lower(k) - 1e-12 || x(k) > upper(k) + 1e-12) ok = false;
      if (state[k] == 0 && std::abs(g(k)) > 1e-9) ok = false;
      if (state[k] == 1 && g(k) < -1e-12) ok = false;  // at lower: gradient pushes up
      if (state[k] == 2 && g(k) > 1e-12) ok = false;   // at upper: gradient pushes down
    }
    if (ok) return x;
  }
  return std::nullopt;
}

struct SensorEquilibrium {
  Vector x;
  double lambda = 0.0;
};

/// Variational GNE of an affine game with the single aggregate row
/// |x|^2 / N - d <= 0: solve (M + (2 lambda / N) I) x = -c and bisect on
/// lambda >= 0 until the row is tight.
inline SensorEquilibrium sensor_equilibrium(const Matrix& M, const Vector& c, int N, double d) {
  const int n = static_cast<int>(c.size());
  auto x_of = [&](double lam) -> Vector {
    return (M + (2.0 * lam / N) * Matrix::Identity(n, n)).lu().solve(-c);
  };
  auto g_of = [&](double lam) { return x_of(lam).squaredNorm() / N - d; };
  if (g_of(0.0) <= 0.0) return {x_of(0.0), 0.0};
  double lo = 0.0, hi = 1.0;
  while (g_of(hi) > 0.0) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (g_of(mid) > 0.0 ? lo : hi) = mid;
  }
  const double lam = 0.5 * (lo + hi);
  return {x_of(lam), lam};
}

/// Reference right-hand side of the full-information gradient play, built
/// from dense Kronecker products.
struct GpReference {
  Vector x_dot;
  Vector z_dot;
  Vector lam_dot;
};

inline GpReference gp_reference(const Game& game, const Matrix& L, const Vector& x,
                                const Vector& lam, const Vector& z) {
  const int N = game.num_players(), m = game.num_rows(), n = game.total_dim();
  Matrix Lm = Matrix::Zero(N * m, N * m);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < N; ++j) Lm.block(i * m, j * m, m, m) = L(i, j) * Matrix::Identity(m, m);
  }
  Vector G(N * m);
  Matrix JG = Matrix::Zero(N * m, n);
  for (int i = 0; i < N; ++i) {
    const Vector xi = x.segment(game.offset(i), game.action_dim(i));
    G.segment(i * m, m) = game.constraint(i, xi);
    JG.block(i * m, game.offset(i), m, game.action_dim(i)) = game.constraint_jacobian(i, xi);
  }
  GpReference r;
  r.x_dot = -pseudo_gradient(game, x) - JG.transpose() * lam;
  r.z_dot = Lm * lam;
  const Vector v = G - Lm * z - Lm * lam;
  r.lam_dot = v;
  for (int k = 0; k < v.size(); ++k) {
    if (lam(k) <= 1e-12 && v(k) < 0.0) r.lam_dot(k) = 0.0;
  }
  return r;
}

/// Complete-graph Laplacian N I - 1 1^T.
inline Matrix complete_laplacian(int N) {
  return N * Matrix::Identity(N, N) - Matrix::Ones(N, N);
}

}  // namespace pgne::testing
