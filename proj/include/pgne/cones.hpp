#pragma once

#include "pgne/common.hpp"

namespace pgne {

/// Components at or below this value count as sitting on the boundary.
inline constexpr double kBoundaryTol = 1e-12;

/// Projection of v onto the tangent cone of R^k_+ at x.
Vector differentiated_projection(const Vector& x, const Vector& v);

struct TangentNormal {
  Vector tangent;
  Vector normal;
};

/// v = tangent + normal with <tangent, normal> = 0.
TangentNormal tangent_normal_split(const Vector& x, const Vector& v);

/// ||min(lam, -w)||_inf; zero iff w lies in the normal cone of R^k_+ at lam.
double complementarity_residual(const Vector& lam, const Vector& w);

/// 2-norm variant of complementarity_residual.
double complementarity_residual_l2(const Vector& lam, const Vector& w);

/// Tangent-cone projection for the box [lower, upper]; infinite bounds allowed.
Vector box_differentiated_projection(const Vector& x, const Vector& v,
                                     const Vector& lower, const Vector& upper);

/// Componentwise clamp onto [lower, upper].
Vector clamp_to_box(const Vector& v, const Vector& lower, const Vector& upper);

}  // namespace pgne
