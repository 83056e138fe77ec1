#include "pgne/game.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace pgne {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "invalid input";
    case ErrorKind::kInvalidState: return "invalid state";
    case ErrorKind::kInvalidParameter: return "invalid parameter";
    case ErrorKind::kInfeasible: return "infeasible";
    case ErrorKind::kInapplicable: return "inapplicable";
    case ErrorKind::kUnsupportedFamily: return "unsupported family";
    case ErrorKind::kDivergence: return "divergence";
  }
  return "error";
}

const char* to_string(MonotonicityClass c) {
  switch (c) {
    case MonotonicityClass::kStrongly: return "strongly";
    case MonotonicityClass::kStrictly: return "strictly";
    case MonotonicityClass::kMonotone: return "monotone";
    case MonotonicityClass::kHypomonotone: return "hypomonotone";
    case MonotonicityClass::kIndefinite: return "indefinite";
  }
  return "indefinite";
}

Game::Game(Definition def) : def_(std::move(def)) {
  require(!def_.action_dims.empty(), ErrorKind::kInvalidInput,
          "a game needs at least one player");
  require(def_.num_rows >= 0, ErrorKind::kInvalidInput, "negative row count");
  require(static_cast<bool>(def_.gradient), ErrorKind::kInvalidInput,
          "missing cost gradient");
  offsets_.reserve(def_.action_dims.size());
  for (int d : def_.action_dims) {
    require(d >= 1, ErrorKind::kInvalidInput, "action dimension must be >= 1");
    offsets_.push_back(total_dim_);
    total_dim_ += d;
  }
  if (def_.num_rows > 0) {
    require(def_.constraint && def_.jacobian, ErrorKind::kInvalidInput,
            "constraint rows declared without evaluators");
  }
  if (def_.affine) {
    require(def_.affine->M.rows() == total_dim_ &&
                def_.affine->M.cols() == total_dim_ &&
                def_.affine->c.size() == total_dim_,
            ErrorKind::kInvalidInput, "affine pseudo-gradient has wrong shape");
  }
  if (def_.linear) {
    const auto& lin = *def_.linear;
    require(static_cast<int>(lin.A.size()) == num_players() &&
                static_cast<int>(lin.b.size()) == num_players(),
            ErrorKind::kInvalidInput, "linear constraints need one block per player");
    for (int i = 0; i < num_players(); ++i) {
      require(lin.A[i].rows() == def_.num_rows &&
                  lin.A[i].cols() == def_.action_dims[i] &&
                  lin.b[i].size() == def_.num_rows,
              ErrorKind::kInvalidInput, "linear constraint block has wrong shape");
    }
  }
}

Game Game::quadratic(std::string name, std::vector<int> action_dims,
                     AffineGradient affine,
                     std::optional<LinearConstraints> linear) {
  Definition def;
  def.name = std::move(name);
  def.action_dims = std::move(action_dims);
  std::vector<int> offsets;
  int n = 0;
  for (int d : def.action_dims) {
    offsets.push_back(n);
    n += d;
  }
  def.num_rows = linear && !linear->A.empty() ? static_cast<int>(linear->A[0].rows()) : 0;
  def.affine = affine;
  def.linear = linear;
  auto dims = def.action_dims;
  def.gradient = [affine, offsets, dims](int i, const Vector& x) -> Vector {
    return affine.M.middleRows(offsets[i], dims[i]) * x +
           affine.c.segment(offsets[i], dims[i]);
  };
  if (def.num_rows > 0) {
    def.constraint = [lin = *linear](int i, const Vector& xi) -> Vector {
      return lin.A[i] * xi - lin.b[i];
    };
    def.jacobian = [lin = *linear](int i, const Vector&) -> Matrix {
      return lin.A[i];
    };
  }
  return Game(std::move(def));
}

Vector Game::player_gradient(int player, const Vector& x) const {
  return def_.gradient(player, x);
}

double Game::cost(int player, const Vector& x) const {
  require(has_cost(), ErrorKind::kInapplicable, "game has no cost evaluator");
  return def_.cost(player, x);
}

Vector Game::constraint(int player, const Vector& xi) const {
  if (num_rows() == 0) return Vector(0);
  return def_.constraint(player, xi);
}

Matrix Game::constraint_jacobian(int player, const Vector& xi) const {
  if (num_rows() == 0) return Matrix(0, action_dim(player));
  return def_.jacobian(player, xi);
}

namespace {

void check_length(const Vector& v, int expected, const char* what) {
  require(v.size() == expected, ErrorKind::kInvalidInput,
          std::string(what) + ": expected length " + std::to_string(expected) +
              ", got " + std::to_string(v.size()));
}

}  // namespace

Vector pseudo_gradient(const Game& game, const Vector& x) {
  check_length(x, game.total_dim(), "pseudo_gradient");
  Vector out(game.total_dim());
  for (int i = 0; i < game.num_players(); ++i) {
    out.segment(game.offset(i), game.action_dim(i)) = game.player_gradient(i, x);
  }
  return out;
}

StackedConstraints stacked_constraints(const Game& game, const Vector& x) {
  check_length(x, game.total_dim(), "stacked_constraints");
  const int m = game.num_rows();
  StackedConstraints out;
  out.values.resize(game.stacked_rows());
  out.jacobian = Matrix::Zero(game.stacked_rows(), game.total_dim());
  for (int i = 0; i < game.num_players(); ++i) {
    const Vector xi = game.block(x, i);
    out.values.segment(i * m, m) = game.constraint(i, xi);
    out.jacobian.block(i * m, game.offset(i), m, game.action_dim(i)) =
        game.constraint_jacobian(i, xi);
  }
  return out;
}

Vector stacked_constraint_values(const Game& game, const Vector& x) {
  check_length(x, game.total_dim(), "stacked_constraint_values");
  const int m = game.num_rows();
  Vector out(game.stacked_rows());
  for (int i = 0; i < game.num_players(); ++i) {
    out.segment(i * m, m) = game.constraint(i, game.block(x, i));
  }
  return out;
}

Vector constraint_gradient_product(const Game& game, const Vector& x,
                                   const Vector& lambda) {
  check_length(x, game.total_dim(), "constraint_gradient_product (x)");
  check_length(lambda, game.stacked_rows(), "constraint_gradient_product (lambda)");
  Vector out = Vector::Zero(game.total_dim());
  const int m = game.num_rows();
  if (m == 0) return out;
  for (int i = 0; i < game.num_players(); ++i) {
    out.segment(game.offset(i), game.action_dim(i)) =
        game.constraint_jacobian(i, game.block(x, i)).transpose() *
        lambda.segment(i * m, m);
  }
  return out;
}

Vector aggregate_constraint(const Game& game, const Vector& x) {
  check_length(x, game.total_dim(), "aggregate_constraint");
  Vector g = Vector::Zero(game.num_rows());
  for (int i = 0; i < game.num_players(); ++i) {
    g += game.constraint(i, game.block(x, i));
  }
  return g;
}

Vector extended_pseudo_gradient(const Game& game, const Vector& x_est) {
  const int n = game.total_dim();
  check_length(x_est, game.num_players() * n, "extended_pseudo_gradient");
  Vector out(n);
  for (int i = 0; i < game.num_players(); ++i) {
    out.segment(game.offset(i), game.action_dim(i)) =
        game.player_gradient(i, x_est.segment(i * n, n));
  }
  return out;
}

namespace {

MonotonicityClass classify(double mu, bool all_positive) {
  constexpr double kBand = 1e-8;
  if (!std::isfinite(mu)) return MonotonicityClass::kIndefinite;
  if (mu > kBand) return MonotonicityClass::kStrongly;
  if (mu >= -kBand) {
    return (all_positive && mu > 0.0) ? MonotonicityClass::kStrictly
                                      : MonotonicityClass::kMonotone;
  }
  return MonotonicityClass::kHypomonotone;
}

}  // namespace

MonotonicityReport monotonicity_report(const Game& game, int sample_count,
                                       std::uint64_t seed) {
  require(sample_count >= 2, ErrorKind::kInvalidParameter,
          "monotonicity_report needs at least two samples");
  MonotonicityReport report;
  if (const auto& affine = game.affine_gradient()) {
    const Matrix sym = 0.5 * (affine->M + affine->M.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
    report.mu = eig.eigenvalues().minCoeff();
    Eigen::JacobiSVD<Matrix> svd(affine->M);
    report.theta = svd.singularValues()(0);
    report.exact = true;
    report.cls = classify(report.mu, false);
    return report;
  }

  // Sampled quotients <x-y, F(x)-F(y)> / |x-y|^2 over a box around the origin.
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-10.0, 10.0);
  const int n = game.total_dim();
  double mu = std::numeric_limits<double>::infinity();
  double theta = 0.0;
  bool all_positive = true;
  int accepted = 0;
  while (accepted < sample_count) {
    Vector x(n), y(n);
    for (int k = 0; k < n; ++k) x(k) = unif(rng);
    for (int k = 0; k < n; ++k) y(k) = unif(rng);
    const Vector d = x - y;
    const double dd = d.squaredNorm();
    if (dd < 1e-12) continue;
    const Vector dF = pseudo_gradient(game, x) - pseudo_gradient(game, y);
    const double q = d.dot(dF) / dd;
    mu = std::min(mu, q);
    theta = std::max(theta, dF.norm() / std::sqrt(dd));
    all_positive = all_positive && q > 0.0;
    ++accepted;
  }
  report.mu = mu;
  report.theta = theta;
  report.cls = classify(mu, all_positive);
  return report;
}

namespace {

Matrix complete_graph_laplacian(int n) {
  return static_cast<double>(n) * Matrix::Identity(n, n) - Matrix::Ones(n, n);
}

// Lexicographic k-subsets of {0..m-1}.
bool next_combination(std::vector<int>& idx, int m) {
  const int k = static_cast<int>(idx.size());
  for (int i = k - 1; i >= 0; --i) {
    if (idx[i] < m - k + i) {
      ++idx[i];
      for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
      return true;
    }
  }
  return false;
}

struct Candidate {
  Vector x;
  Vector lambda_active;
  bool singular = false;
  bool ok = false;
};

}  // namespace

Vector consensus_auxiliary(const Game& game, const Matrix& laplacian,
                           const Vector& x_star) {
  const int N = game.num_players();
  const int m = game.num_rows();
  require(laplacian.rows() == N && laplacian.cols() == N, ErrorKind::kInvalidInput,
          "laplacian size does not match the number of players");
  if (m == 0) return Vector(0);
  const Vector g = aggregate_constraint(game, x_star);
  // Row i of R is g_i(x^i) - g(x)/N; the columns of R sum to zero over players.
  Matrix R(N, m);
  for (int i = 0; i < N; ++i) {
    R.row(i) = (game.constraint(i, game.block(x_star, i)) - g / N).transpose();
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(laplacian);
  const Vector& ev = eig.eigenvalues();
  const double tol = 1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  Matrix pinv = Matrix::Zero(N, N);
  for (int k = 0; k < N; ++k) {
    if (ev(k) > tol) {
      pinv += eig.eigenvectors().col(k) * eig.eigenvectors().col(k).transpose() / ev(k);
    }
  }
  const Matrix Z = pinv * R;
  Vector z(N * m);
  for (int i = 0; i < N; ++i) z.segment(i * m, m) = Z.row(i).transpose();
  return z;
}

KktPoint solve_gne_oracle(const Game& game, const std::optional<Matrix>& laplacian) {
  require(game.has_quadratic_form(), ErrorKind::kInapplicable,
          "the oracle needs an affine pseudo-gradient and affine constraints");
  const auto& affine = *game.affine_gradient();
  const int n = game.total_dim();
  const int m = game.num_rows();
  const int N = game.num_players();
  constexpr double kTol = 1e-9;
  constexpr long long kBudget = 4'000'000;

  Matrix A = Matrix::Zero(m, n);
  Vector b = Vector::Zero(m);
  if (m > 0) {
    const auto& lin = *game.linear_constraints();
    for (int i = 0; i < N; ++i) {
      A.middleCols(game.offset(i), game.action_dim(i)) = lin.A[i];
      b += lin.b[i];
    }
  }

  Eigen::FullPivLU<Matrix> m_lu(affine.M);
  const bool m_invertible = m_lu.isInvertible();
  Matrix Minv_At;
  Vector Minv_c;
  if (m_invertible) {
    Minv_At = m_lu.solve(A.transpose());
    Minv_c = m_lu.solve(affine.c);
  }

  auto solve_active = [&](const std::vector<int>& active) {
    Candidate cand;
    const int k = static_cast<int>(active.size());
    Matrix As(k, n);
    Vector bs(k);
    for (int r = 0; r < k; ++r) {
      As.row(r) = A.row(active[r]);
      bs(r) = b(active[r]);
    }
    if (m_invertible) {
      // Schur complement on the multipliers of the active rows.
      Matrix S(k, k);
      Matrix MinvAst(n, k);
      for (int r = 0; r < k; ++r) MinvAst.col(r) = Minv_At.col(active[r]);
      S = As * MinvAst;
      const Vector rhs = -bs - As * Minv_c;
      Vector lam(k);
      if (k > 0) {
        Eigen::FullPivLU<Matrix> lu(S);
        if (lu.isInvertible()) {
          lam = lu.solve(rhs);
        } else {
          cand.singular = true;
          lam = S.completeOrthogonalDecomposition().solve(rhs);
          if ((S * lam - rhs).norm() > kTol * std::max(1.0, rhs.norm())) return cand;
        }
      }
      cand.x = -Minv_c - (k > 0 ? Vector(MinvAst * lam) : Vector::Zero(n));
      cand.lambda_active = lam;
    } else {
      Matrix K = Matrix::Zero(n + k, n + k);
      K.topLeftCorner(n, n) = affine.M;
      K.topRightCorner(n, k) = As.transpose();
      K.bottomLeftCorner(k, n) = As;
      Vector rhs(n + k);
      rhs << -affine.c, bs;
      Eigen::FullPivLU<Matrix> lu(K);
      Vector sol;
      if (lu.isInvertible()) {
        sol = lu.solve(rhs);
      } else {
        cand.singular = true;
        sol = K.completeOrthogonalDecomposition().solve(rhs);
        if ((K * sol - rhs).norm() > kTol * std::max(1.0, rhs.norm())) return cand;
      }
      cand.x = sol.head(n);
      cand.lambda_active = sol.tail(k);
    }
    if (k > 0 && cand.lambda_active.minCoeff() < -kTol) return cand;
    const Vector g = A * cand.x - b;
    std::vector<bool> is_active(m, false);
    for (int r : active) is_active[r] = true;
    for (int r = 0; r < m; ++r) {
      if (!is_active[r] && g(r) > kTol) return cand;
    }
    cand.ok = true;
    return cand;
  };

  long long tried = 0;
  for (int k = 0; k <= m; ++k) {
    std::vector<int> active(k);
    for (int r = 0; r < k; ++r) active[r] = r;
    do {
      if (++tried > kBudget) {
        throw Error(ErrorKind::kInfeasible,
                    "active-set enumeration budget exhausted before a feasible set was found");
      }
      Candidate cand = solve_active(active);
      if (!cand.ok) continue;
      KktPoint point;
      point.x_star = cand.x;
      point.non_unique = cand.singular;
      point.lambda_common = Vector::Zero(m);
      point.active_set.assign(m, false);
      for (int r = 0; r < k; ++r) {
        point.lambda_common(active[r]) = std::max(0.0, cand.lambda_active(r));
        point.active_set[active[r]] = true;
      }
      point.lambda_star.resize(N * m);
      for (int i = 0; i < N; ++i) point.lambda_star.segment(i * m, m) = point.lambda_common;
      const Matrix lap = laplacian ? *laplacian : complete_graph_laplacian(N);
      point.z_star = consensus_auxiliary(game, lap, point.x_star);
      return point;
    } while (k > 0 && next_combination(active, m));
  }
  throw Error(ErrorKind::kInfeasible, "no active set satisfies the KKT conditions");
}

KktPoint solve_box_oracle(const Game& game, const Vector& lower, const Vector& upper) {
  require(game.affine_gradient().has_value() && game.num_rows() == 0, ErrorKind::kInapplicable,
          "the box oracle needs an affine pseudo-gradient and no coupled rows");
  const int n = game.total_dim();
  require(lower.size() == n && upper.size() == n && (lower.array() <= upper.array()).all(),
          ErrorKind::kInvalidInput, "box bounds must have length n with lower <= upper");
  const MonotonicityReport mono = monotonicity_report(game, 2, 0);  // exact for affine F
  require(mono.mu > 0.0, ErrorKind::kInapplicable,
          "the box oracle needs a strongly monotone pseudo-gradient");
  const auto& f = *game.affine_gradient();
  const double gamma = mono.mu / (mono.theta * mono.theta);
  // Contraction factor sqrt(1 - mu^2 / theta^2).
  Vector x = (0.5 * (lower + upper)).cwiseMax(lower).cwiseMin(upper);
  for (int k = 0; k < n; ++k) {
    if (!std::isfinite(x(k))) x(k) = std::isfinite(lower(k)) ? lower(k) : (std::isfinite(upper(k)) ? upper(k) : 0.0);
  }
  bool converged = false;
  for (long it = 0; it < 10'000'000 && !converged; ++it) {
    const Vector next = (x - gamma * (f.M * x + f.c)).cwiseMax(lower).cwiseMin(upper);
    converged = (next - x).cwiseAbs().maxCoeff() <= 1e-15 * std::max(1.0, x.cwiseAbs().maxCoeff());
    x = next;
  }
  require(converged, ErrorKind::kInfeasible, "box oracle did not converge");
  KktPoint k;
  k.x_star = x;
  k.lambda_star = Vector(0);
  k.lambda_common = Vector(0);
  k.z_star = Vector(0);
  return k;
}

}  // namespace pgne
