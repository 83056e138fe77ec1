#include "pgne/cones.hpp"

#include <algorithm>
#include <cmath>

namespace pgne {

namespace {

void require_nonnegative(const Vector& x, const char* what) {
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    require(x(k) >= -kBoundaryTol, ErrorKind::kInvalidState,
            std::string(what) + ": component " + std::to_string(k) + " is negative");
  }
}

Vector min_lam_minus_w(const Vector& lam, const Vector& w) {
  require(lam.size() == w.size(), ErrorKind::kInvalidInput,
          "complementarity_residual: length mismatch");
  require_nonnegative(lam, "complementarity_residual");
  return lam.cwiseMin(-w);
}

}  // namespace

Vector differentiated_projection(const Vector& x, const Vector& v) {
  require(x.size() == v.size(), ErrorKind::kInvalidInput,
          "differentiated_projection: length mismatch");
  require_nonnegative(x, "differentiated_projection");
  Vector out = v;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (x(k) <= kBoundaryTol) out(k) = std::max(0.0, v(k));
  }
  return out;
}

TangentNormal tangent_normal_split(const Vector& x, const Vector& v) {
  TangentNormal out;
  out.tangent = differentiated_projection(x, v);
  out.normal = v - out.tangent;
  return out;
}

double complementarity_residual(const Vector& lam, const Vector& w) {
  if (lam.size() == 0) return 0.0;
  return min_lam_minus_w(lam, w).cwiseAbs().maxCoeff();
}

double complementarity_residual_l2(const Vector& lam, const Vector& w) {
  if (lam.size() == 0) return 0.0;
  return min_lam_minus_w(lam, w).norm();
}

Vector box_differentiated_projection(const Vector& x, const Vector& v,
                                     const Vector& lower, const Vector& upper) {
  require(x.size() == v.size() && x.size() == lower.size() && x.size() == upper.size(),
          ErrorKind::kInvalidInput, "box_differentiated_projection: length mismatch");
  Vector out = v;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    require(x(k) >= lower(k) - kBoundaryTol && x(k) <= upper(k) + kBoundaryTol,
            ErrorKind::kInvalidState,
            "box_differentiated_projection: component " + std::to_string(k) +
                " lies outside its box");
    if (x(k) <= lower(k) + kBoundaryTol) out(k) = std::max(0.0, out(k));
    if (x(k) >= upper(k) - kBoundaryTol) out(k) = std::min(0.0, out(k));
  }
  return out;
}

Vector clamp_to_box(const Vector& v, const Vector& lower, const Vector& upper) {
  return v.cwiseMax(lower).cwiseMin(upper);
}

}  // namespace pgne
