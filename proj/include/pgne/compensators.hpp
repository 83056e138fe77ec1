#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "pgne/common.hpp"

namespace pgne {

using ComplexMatrix = Eigen::MatrixXcd;

/// x' = A x + B u, y = C x + D u with square io dimension k.
struct LtiBlock {
  std::string name;
  Matrix A;  // p x p
  Matrix B;  // p x k
  Matrix C;  // k x p
  Matrix D;  // k x k
  /// Storage certificate V = x^T P x / 2. Positive semidefinite matrices are
  /// accepted because non-minimal passive realizations admit no definite one.
  std::optional<Matrix> P;
  /// Attests that an output held at zero over an interval forces a constant
  /// state. Set analytically by the constructors that satisfy it.
  bool zero_output_forces_constant_state = false;

  int state_dim() const { return static_cast<int>(A.rows()); }
  int io_dim() const { return static_cast<int>(D.rows()); }
};

/// Validates shapes, the rank conditions on B and C, and P when present.
LtiBlock make_lti_block(std::string name, Matrix A, Matrix B, Matrix C, Matrix D,
                        std::optional<Matrix> P = std::nullopt);

/// Same as make_lti_block without the rank conditions; used for fixtures that
/// are meant to fail later checks.
LtiBlock make_lti_block_unchecked(std::string name, Matrix A, Matrix B, Matrix C,
                                  Matrix D, std::optional<Matrix> P = std::nullopt);

/// LTI block run under a nonnegativity projection: x' = Pi[x, A x + B u],
/// y = max(0, C x). Requires D = 0, C = B^T, B >= 0 with a positive entry in
/// every column, and A + A^T negative semidefinite.
struct ProjectedLtiBlock {
  LtiBlock inner;
};

ProjectedLtiBlock make_projected_block(LtiBlock inner);

/// Empty string when the structure restriction holds, else the violated rule.
std::string projected_structure_violation(const LtiBlock& block);

// Canonical constructors.
LtiBlock integrator_block(int dim);
LtiBlock pfc_first_order(double a, int dim);
ProjectedLtiBlock pfc_lambda_block(const Vector& a_bar, const Vector& b_bar);
ProjectedLtiBlock projected_integrator_block(int dim);
LtiBlock ofc_heavy_anchor(double alpha, double beta, int dim);
LtiBlock ofc_nd(int dim);
LtiBlock second_order_agent_block(double b, int dim);
/// Static block y = d u (empty state).
LtiBlock static_feedthrough(double d, int dim);

/// 400 log-spaced frequencies in [1e-4, 1e4] rad/s.
std::vector<double> default_frequency_grid();
std::vector<double> log_frequency_grid(double lo, double hi, int count);

/// G(j omega); empty optional when j omega is (numerically) a pole.
std::optional<ComplexMatrix> frequency_response(const LtiBlock& block, double omega);

bool check_hurwitz(const LtiBlock& block);

struct PositiveRealReport {
  bool pr = false;
  bool spr = false;
  double min_eig_over_grid = 0.0;
  int skipped_points = 0;
};

PositiveRealReport check_positive_real(const LtiBlock& block,
                                       const std::vector<double>& grid);

struct OutputStrictPassivityReport {
  bool holds = false;
  double delta = 0.0;
};

OutputStrictPassivityReport check_output_strict_passivity(
    const LtiBlock& block, const std::vector<double>& grid);

/// True iff ||D - C A^{-1} B||_inf < 1e-10. Singular A is an inapplicable error.
bool check_zero_dc_gain(const LtiBlock& block);

/// Pi with A Pi = 0 and C Pi = I (least squares, residual < 1e-9, full column
/// rank). `require_nonnegative` adds Pi >= 0 for projected blocks.
Matrix solve_regulator_equations(const LtiBlock& block, bool require_nonnegative = false);

/// max(||A Pi||, ||C Pi - I||) for a candidate Pi.
double regulator_residual(const LtiBlock& block, const Matrix& Pi);

/// Largest eigenvalue of the dissipation matrix
/// [[A^T P + P A + 2 delta C^T C, P B - C^T + 2 delta C^T D],
///  [.^T, -(D + D^T) + 2 delta D^T D]]; nonpositive means P certifies
/// V' <= u^T y - delta |y|^2.
double storage_certificate_margin(const LtiBlock& block, double delta);

}  // namespace pgne
