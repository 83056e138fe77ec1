#include "pgne/compensators.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

namespace pgne {

namespace {

using Complex = std::complex<double>;

double max_abs(const Matrix& M) { return M.size() == 0 ? 0.0 : M.cwiseAbs().maxCoeff(); }

void check_shapes(const LtiBlock& b) {
  const auto p = b.A.rows();
  const auto k = b.D.rows();
  require(b.A.cols() == p, ErrorKind::kInvalidInput, b.name + ": A must be square");
  require(b.D.cols() == k, ErrorKind::kInvalidInput, b.name + ": D must be square");
  require(b.B.rows() == p && b.B.cols() == k, ErrorKind::kInvalidInput,
          b.name + ": B has the wrong shape");
  require(b.C.rows() == k && b.C.cols() == p, ErrorKind::kInvalidInput,
          b.name + ": C has the wrong shape");
  if (b.P) {
    const Matrix& P = *b.P;
    require(P.rows() == p && P.cols() == p, ErrorKind::kInvalidInput,
            b.name + ": P has the wrong shape");
    const double scale = std::max(1.0, max_abs(P));
    require(max_abs(P - P.transpose()) <= 1e-12 * scale,
            ErrorKind::kInvalidInput, b.name + ": P must be symmetric");
    if (p > 0) {
      Eigen::SelfAdjointEigenSolver<Matrix> eig(P, Eigen::EigenvaluesOnly);
      require(eig.eigenvalues().minCoeff() >= -1e-12 * scale, ErrorKind::kInvalidInput,
              b.name + ": P must be positive semidefinite");
    }
  }
}

int rank_of(const Matrix& M) {
  if (M.size() == 0) return 0;
  Eigen::FullPivLU<Matrix> lu(M);
  lu.setThreshold(1e-10);
  return static_cast<int>(lu.rank());
}

double min_hermitian_eig(const ComplexMatrix& H) {
  if (H.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(H, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

double min_symmetric_eig(const Matrix& H) {
  if (H.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(H, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

bool poles_in_closed_left_half_plane(const LtiBlock& b) {
  if (b.state_dim() == 0) return true;
  Eigen::EigenSolver<Matrix> eig(b.A, false);
  return eig.eigenvalues().real().maxCoeff() <= 1e-10;
}

Matrix identity(int dim) { return Matrix::Identity(dim, dim); }

}  // namespace

LtiBlock make_lti_block_unchecked(std::string name, Matrix A, Matrix B, Matrix C, Matrix D,
                                  std::optional<Matrix> P) {
  LtiBlock b{std::move(name), std::move(A), std::move(B), std::move(C), std::move(D),
             std::move(P), false};
  check_shapes(b);
  return b;
}

LtiBlock make_lti_block(std::string name, Matrix A, Matrix B, Matrix C, Matrix D,
                        std::optional<Matrix> P) {
  LtiBlock b = make_lti_block_unchecked(std::move(name), std::move(A), std::move(B),
                                        std::move(C), std::move(D), std::move(P));
  if (b.state_dim() > 0) {
    require(rank_of(b.B) == b.io_dim(), ErrorKind::kInvalidInput,
            b.name + ": B must have full column rank");
    require(rank_of(b.C) == b.io_dim(), ErrorKind::kInvalidInput,
            b.name + ": C must have full row rank");
  }
  return b;
}

std::string projected_structure_violation(const LtiBlock& b) {
  if (max_abs(b.D) != 0.0) return "projected blocks need D = 0";
  if (max_abs(b.C - b.B.transpose()) > 1e-12) {
    return "projected blocks need C = B^T";
  }
  if (b.B.size() > 0 && b.B.minCoeff() < 0.0) return "projected blocks need B >= 0";
  for (int c = 0; c < b.B.cols(); ++c) {
    if (b.B.col(c).maxCoeff() <= 0.0) return "every column of B needs a positive entry";
  }
  if (b.state_dim() > 0 && -min_symmetric_eig(-(b.A + b.A.transpose())) > 1e-12) {
    return "projected blocks need A + A^T negative semidefinite";
  }
  return "";
}

ProjectedLtiBlock make_projected_block(LtiBlock inner) {
  const std::string why = projected_structure_violation(inner);
  require(why.empty(), ErrorKind::kInvalidInput, inner.name + ": " + why);
  return ProjectedLtiBlock{std::move(inner)};
}

LtiBlock integrator_block(int dim) {
  require(dim >= 1, ErrorKind::kInvalidParameter, "dimension must be >= 1");
  LtiBlock b = make_lti_block("integrator", Matrix::Zero(dim, dim), identity(dim),
                              identity(dim), Matrix::Zero(dim, dim), identity(dim));
  b.zero_output_forces_constant_state = true;
  return b;
}

LtiBlock pfc_first_order(double a, int dim) {
  require(a > 0.0, ErrorKind::kInvalidParameter, "pfc_first_order needs a > 0");
  require(dim >= 1, ErrorKind::kInvalidParameter, "dimension must be >= 1");
  return make_lti_block("pfc_first_order", -a * identity(dim), identity(dim), identity(dim),
                        Matrix::Zero(dim, dim), identity(dim));
}

ProjectedLtiBlock pfc_lambda_block(const Vector& a_bar, const Vector& b_bar) {
  require(a_bar.size() >= 1 && a_bar.size() == b_bar.size(), ErrorKind::kInvalidParameter,
          "pfc_lambda_block needs equal-length nonempty parameter vectors");
  require(a_bar.minCoeff() > 0.0 && b_bar.minCoeff() > 0.0, ErrorKind::kInvalidParameter,
          "pfc_lambda_block needs positive entries");
  const int r = static_cast<int>(a_bar.size());
  Matrix B = b_bar.asDiagonal();
  return make_projected_block(make_lti_block("pfc_lambda", Matrix((-a_bar).asDiagonal()), B,
                                             B.transpose(), Matrix::Zero(r, r),
                                             identity(r)));
}

ProjectedLtiBlock projected_integrator_block(int dim) {
  LtiBlock b = integrator_block(dim);
  b.name = "projected_integrator";
  return make_projected_block(std::move(b));
}

LtiBlock ofc_heavy_anchor(double alpha, double beta, int dim) {
  require(alpha > 0.0 && beta > 0.0, ErrorKind::kInvalidParameter,
          "heavy-anchor needs alpha > 0 and beta > 0");
  require(dim >= 1, ErrorKind::kInvalidParameter, "dimension must be >= 1");
  LtiBlock b = make_lti_block("heavy_anchor", -alpha * identity(dim), alpha * identity(dim),
                              -beta * identity(dim), beta * identity(dim),
                              (beta / alpha) * identity(dim));
  // w = beta (u - xi) = 0 gives xi' = alpha (u - xi) = 0.
  b.zero_output_forces_constant_state = true;
  return b;
}

LtiBlock ofc_nd(int dim) {
  require(dim >= 1, ErrorKind::kInvalidParameter, "dimension must be >= 1");
  const int p = 2 * dim;
  Matrix A = Matrix::Zero(p, p);
  A.topRightCorner(dim, dim) = identity(dim);
  A.bottomLeftCorner(dim, dim) = -identity(dim);
  A.bottomRightCorner(dim, dim) = -identity(dim);
  Matrix B = Matrix::Zero(p, dim);
  B.bottomRows(dim) = identity(dim);
  Matrix C = Matrix::Zero(dim, p);
  C.rightCols(dim) = identity(dim);
  LtiBlock b = make_lti_block("ofc_nd", A, B, C, Matrix::Zero(dim, dim), identity(p));
  // w = xi_2 = 0 gives xi_1' = xi_2 = 0.
  b.zero_output_forces_constant_state = true;
  return b;
}

LtiBlock second_order_agent_block(double b, int dim) {
  require(b > 0.0, ErrorKind::kInvalidParameter, "second_order_agent_block needs b > 0");
  require(dim >= 1, ErrorKind::kInvalidParameter, "dimension must be >= 1");
  const int p = 2 * dim;
  Matrix A = Matrix::Zero(p, p);
  A.topRightCorner(dim, dim) = identity(dim);
  A.bottomRightCorner(dim, dim) = -(1.0 / b) * identity(dim);
  Matrix B = Matrix::Zero(p, dim);
  B.bottomRows(dim) = identity(dim);
  Matrix C(dim, p);
  C << identity(dim), b * identity(dim);
  // H(s) = b/s; the only storage is semidefinite: V = |x1 + b x2|^2 / (2b).
  Matrix P(p, p);
  P << identity(dim) / b, identity(dim), identity(dim), b * identity(dim);
  return make_lti_block("second_order_agent", A, B, C, Matrix::Zero(dim, dim), P);
}

LtiBlock static_feedthrough(double d, int dim) {
  require(d >= 0.0, ErrorKind::kInvalidParameter, "static feedthrough needs d >= 0");
  require(dim >= 1, ErrorKind::kInvalidParameter, "dimension must be >= 1");
  return make_lti_block("static_feedthrough", Matrix(0, 0), Matrix(0, dim), Matrix(dim, 0),
                        d * identity(dim), Matrix(0, 0));
}

std::vector<double> log_frequency_grid(double lo, double hi, int count) {
  require(lo > 0.0 && hi > lo && count >= 2, ErrorKind::kInvalidParameter,
          "frequency grid needs 0 < lo < hi and at least two points");
  std::vector<double> grid(count);
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (int k = 0; k < count; ++k) {
    grid[k] = std::pow(10.0, a + (b - a) * k / (count - 1));
  }
  return grid;
}

std::vector<double> default_frequency_grid() { return log_frequency_grid(1e-4, 1e4, 400); }

std::optional<ComplexMatrix> frequency_response(const LtiBlock& b, double omega) {
  const int p = b.state_dim();
  ComplexMatrix G = b.D.cast<Complex>();
  if (p == 0) return G;
  ComplexMatrix M = Complex(0.0, omega) * ComplexMatrix::Identity(p, p) - b.A.cast<Complex>();
  Eigen::PartialPivLU<ComplexMatrix> lu(M);
  if (!(lu.rcond() > 1e-13)) return std::nullopt;
  G += b.C.cast<Complex>() * lu.solve(b.B.cast<Complex>());
  return G;
}

bool check_hurwitz(const LtiBlock& b) {
  if (b.state_dim() == 0) return true;
  Eigen::EigenSolver<Matrix> eig(b.A, false);
  return eig.eigenvalues().real().maxCoeff() < -1e-10;
}

PositiveRealReport check_positive_real(const LtiBlock& b, const std::vector<double>& grid) {
  require(!grid.empty(), ErrorKind::kInvalidInput, "frequency grid is empty");
  PositiveRealReport report;
  double min_eig = std::numeric_limits<double>::infinity();
  for (double omega : grid) {
    auto G = frequency_response(b, omega);
    if (!G) {
      ++report.skipped_points;
      std::cerr << "warning: " << b.name << ": pole at omega = " << omega
                << ", grid point skipped\n";
      continue;
    }
    min_eig = std::min(min_eig, min_hermitian_eig(*G + G->adjoint()));
  }
  report.min_eig_over_grid = min_eig;
  const double at_infinity = min_symmetric_eig(b.D + b.D.transpose());
  report.pr = poles_in_closed_left_half_plane(b) && min_eig >= -1e-9 && at_infinity >= -1e-9;
  report.spr = report.pr && check_hurwitz(b) && min_eig > 1e-9;
  return report;
}

OutputStrictPassivityReport check_output_strict_passivity(const LtiBlock& b,
                                                          const std::vector<double>& grid) {
  require(!grid.empty(), ErrorKind::kInvalidInput, "frequency grid is empty");
  std::vector<ComplexMatrix> responses;
  responses.reserve(grid.size() + 1);
  for (double omega : grid) {
    if (auto G = frequency_response(b, omega)) responses.push_back(std::move(*G));
  }
  responses.push_back(b.D.cast<Complex>());  // omega -> infinity

  std::vector<ComplexMatrix> syms, gains;
  std::vector<double> sym_scales, gain_scales;
  for (const ComplexMatrix& G : responses) {
    syms.push_back(G + G.adjoint());
    gains.push_back(G.adjoint() * G);
    sym_scales.push_back(syms.back().size() ? syms.back().cwiseAbs().maxCoeff() : 0.0);
    gain_scales.push_back(gains.back().size() ? gains.back().cwiseAbs().maxCoeff() : 0.0);
  }
  auto feasible = [&](double delta) {
    for (std::size_t k = 0; k < syms.size(); ++k) {
      const double scale = std::max(sym_scales[k], 2.0 * delta * gain_scales[k]);
      if (min_hermitian_eig(syms[k] - 2.0 * delta * gains[k]) < -1e-9 * scale - 1e-300) {
        return false;
      }
    }
    return true;
  };

  OutputStrictPassivityReport report;
  if (!poles_in_closed_left_half_plane(b) || !feasible(0.0)) return report;
  double lo = 0.0;
  double hi = 1.0;
  while (feasible(hi) && hi < 1e8) {
    lo = hi;
    hi *= 2.0;
  }
  if (hi >= 1e8) {
    report.delta = lo;
  } else {
    for (int it = 0; it < 100 && hi - lo > 1e-12 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (feasible(mid) ? lo : hi) = mid;
    }
    report.delta = lo;
  }
  report.holds = report.delta >= 1e-6;
  return report;
}

bool check_zero_dc_gain(const LtiBlock& b) {
  if (b.state_dim() == 0) return max_abs(b.D) < 1e-10;
  Eigen::FullPivLU<Matrix> lu(b.A);
  require(lu.isInvertible(), ErrorKind::kInapplicable,
          b.name + ": A is singular, the DC gain is undefined");
  const Matrix H0 = b.D - b.C * lu.solve(b.B);
  return max_abs(H0) < 1e-10;
}

double regulator_residual(const LtiBlock& b, const Matrix& Pi) {
  const double ra = max_abs(b.A * Pi);
  const double rc = max_abs(b.C * Pi - identity(b.io_dim()));
  return std::max(ra, rc);
}

Matrix solve_regulator_equations(const LtiBlock& b, bool require_nonnegative) {
  const int p = b.state_dim();
  const int k = b.io_dim();
  require(p >= k, ErrorKind::kInfeasible,
          b.name + ": regulator equations need at least as many states as outputs");
  Matrix S(p + k, p);
  S << b.A, b.C;
  Matrix rhs = Matrix::Zero(p + k, k);
  rhs.bottomRows(k) = identity(k);
  Matrix Pi = S.completeOrthogonalDecomposition().solve(rhs);
  const double residual = regulator_residual(b, Pi);
  require(residual < 1e-9, ErrorKind::kInfeasible,
          b.name + ": regulator equations have no solution (residual " +
              std::to_string(residual) + ")");
  require(rank_of(Pi) == k, ErrorKind::kInfeasible,
          b.name + ": regulator solution is rank deficient");
  if (require_nonnegative) {
    require(Pi.minCoeff() >= -1e-12, ErrorKind::kInfeasible,
            b.name + ": regulator solution is not nonnegative");
  }
  return Pi;
}

double storage_certificate_margin(const LtiBlock& b, double delta) {
  require(b.P.has_value(), ErrorKind::kInapplicable, b.name + ": no storage certificate");
  const Matrix& P = *b.P;
  const int p = b.state_dim();
  const int k = b.io_dim();
  Matrix M(p + k, p + k);
  M.topLeftCorner(p, p) = b.A.transpose() * P + P * b.A + 2.0 * delta * b.C.transpose() * b.C;
  M.topRightCorner(p, k) = P * b.B - b.C.transpose() + 2.0 * delta * b.C.transpose() * b.D;
  M.bottomLeftCorner(k, p) = M.topRightCorner(p, k).transpose();
  M.bottomRightCorner(k, k) =
      -(b.D + b.D.transpose()) + 2.0 * delta * b.D.transpose() * b.D;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

}  // namespace pgne
