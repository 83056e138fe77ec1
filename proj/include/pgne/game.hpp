#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pgne/common.hpp"

namespace pgne {

/// Pseudo-gradient of a linear-quadratic game: F(x) = M x + c.
struct AffineGradient {
  Matrix M;
  Vector c;
};

/// Affine private constraints g_i(x^i) = A_i x^i - b_i, one (m x n_i) block
/// per player.
struct LinearConstraints {
  std::vector<Matrix> A;
  std::vector<Vector> b;
};

/// A noncooperative game with separable coupled constraints
/// g(x) = sum_i g_i(x^i) <= 0.
///
/// Players are indexed 0..N-1. Player i controls the block x^i of the stacked
/// action vector; `offset(i)` locates it. All evaluators are pure, so a Game
/// can be shared between threads once built.
class Game {
 public:
  using GradientFn = std::function<Vector(int player, const Vector& x)>;
  using CostFn = std::function<double(int player, const Vector& x)>;
  using ConstraintFn = std::function<Vector(int player, const Vector& xi)>;
  using JacobianFn = std::function<Matrix(int player, const Vector& xi)>;

  struct Definition {
    std::string name;
    std::vector<int> action_dims;
    int num_rows = 0;
    GradientFn gradient;
    CostFn cost;  // optional, used by finite-difference checks
    ConstraintFn constraint;  // may be empty when num_rows == 0
    JacobianFn jacobian;
    std::optional<AffineGradient> affine;
    std::optional<LinearConstraints> linear;
  };

  explicit Game(Definition def);

  /// Builds a game from closed-form data; the evaluators are derived from it.
  static Game quadratic(std::string name, std::vector<int> action_dims,
                        AffineGradient affine,
                        std::optional<LinearConstraints> linear = std::nullopt);

  const std::string& name() const { return def_.name; }
  int num_players() const { return static_cast<int>(def_.action_dims.size()); }
  int action_dim(int player) const { return def_.action_dims.at(player); }
  int offset(int player) const { return offsets_.at(player); }
  int total_dim() const { return total_dim_; }
  int num_rows() const { return def_.num_rows; }
  int stacked_rows() const { return num_players() * num_rows(); }
  const std::vector<int>& action_dims() const { return def_.action_dims; }

  Vector player_gradient(int player, const Vector& x) const;
  double cost(int player, const Vector& x) const;
  bool has_cost() const { return static_cast<bool>(def_.cost); }
  Vector constraint(int player, const Vector& xi) const;
  Matrix constraint_jacobian(int player, const Vector& xi) const;

  const std::optional<AffineGradient>& affine_gradient() const {
    return def_.affine;
  }
  const std::optional<LinearConstraints>& linear_constraints() const {
    return def_.linear;
  }
  bool has_quadratic_form() const {
    return def_.affine.has_value() && (num_rows() == 0 || def_.linear);
  }

  /// x^i as a copy.
  Vector block(const Vector& x, int player) const {
    return x.segment(offset(player), action_dim(player));
  }

 private:
  Definition def_;
  std::vector<int> offsets_;
  int total_dim_ = 0;
};

Vector pseudo_gradient(const Game& game, const Vector& x);

struct StackedConstraints {
  Vector values;    // col{g_i(x^i)}, length N*m
  Matrix jacobian;  // blkdiag{grad g_i(x^i)}, (N*m) x n
};

StackedConstraints stacked_constraints(const Game& game, const Vector& x);

/// col{g_i(x^i)} without forming the Jacobian.
Vector stacked_constraint_values(const Game& game, const Vector& x);

/// blkdiag{grad g_i(x^i)}^T * lambda, touching only each player's own block.
Vector constraint_gradient_product(const Game& game, const Vector& x,
                                   const Vector& lambda);

/// g(x) = sum_i g_i(x^i).
Vector aggregate_constraint(const Game& game, const Vector& x);

/// col{grad_{x^i} J_i(x_est^i)}: each player's partial gradient at its own
/// estimate of the full action profile.
Vector extended_pseudo_gradient(const Game& game, const Vector& x_est);

enum class MonotonicityClass {
  kStrongly,
  kStrictly,
  kMonotone,
  kHypomonotone,
  kIndefinite,
};

const char* to_string(MonotonicityClass c);

struct MonotonicityReport {
  MonotonicityClass cls = MonotonicityClass::kIndefinite;
  double mu = 0.0;     // (estimated) strong-monotonicity modulus
  double theta = 0.0;  // (estimated) Lipschitz constant
  bool exact = false;  // true when computed from the affine form
};

MonotonicityReport monotonicity_report(const Game& game, int sample_count,
                                       std::uint64_t seed);

/// Variational GNE with its multipliers.
struct KktPoint {
  Vector x_star;
  Vector lambda_star;  // 1_N (x) lambda_c
  Vector z_star;
  Vector lambda_common;
  std::vector<bool> active_set;  // over the m aggregate rows
  bool non_unique = false;
};

/// Active-set enumeration over the aggregate rows of a linear-quadratic game.
/// `laplacian` selects the communication graph used to recover z*; the
/// complete graph K_N is used when it is absent.
KktPoint solve_gne_oracle(const Game& game,
                          const std::optional<Matrix>& laplacian = std::nullopt);

/// Equilibrium of an unconstrained affine game restricted to the box
/// [lower, upper]: the fixed point of x = clamp(x - gamma F(x)) with
/// gamma = mu / theta^2, which contracts for strongly monotone F.
/// Throws kInapplicable for games with coupled rows, non-affine or merely
/// monotone pseudo-gradients.
KktPoint solve_box_oracle(const Game& game, const Vector& lower, const Vector& upper);

/// Minimum-norm z with (L (x) I_m) z = G(x*) - 1_N (x) g(x*)/N.
Vector consensus_auxiliary(const Game& game, const Matrix& laplacian,
                           const Vector& x_star);

}  // namespace pgne
