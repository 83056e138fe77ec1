#include "pgne/integrator.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace pgne {

namespace {

constexpr double kDivergenceBound = 1e12;

bool diverged(const Vector& s) {
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (!std::isfinite(s(k)) || std::abs(s(k)) > kDivergenceBound) return true;
  }
  return false;
}

Vector clamp(const Dynamics& dyn, const Vector& s) {
  return s.cwiseMax(dyn.layout().lower()).cwiseMin(dyn.layout().upper());
}

Vector pre(const Dynamics& dyn, const Vector& s) {
  Vector v = dyn.evaluate(s).pre_projection;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    require(std::isfinite(v(k)), ErrorKind::kDivergence, "non-finite vector field");
  }
  return v;
}

}  // namespace

const char* to_string(Scheme s) {
  return s == Scheme::kProjectedEuler ? "projected-euler" : "projected-rk4";
}

const char* to_string(TerminalReason r) {
  switch (r) {
    case TerminalReason::kHorizon: return "horizon";
    case TerminalReason::kResidual: return "residual";
    case TerminalReason::kDivergence: return "divergence";
  }
  return "horizon";
}

Scheme scheme_from_string(const std::string& name) {
  if (name == "projected-euler" || name == "euler") return Scheme::kProjectedEuler;
  if (name == "projected-rk4" || name == "rk4") return Scheme::kProjectedRk4;
  throw Error(ErrorKind::kInvalidInput, "unknown integration scheme '" + name + "'");
}

Vector step(const Dynamics& dyn, const Vector& s, double h, Scheme scheme) {
  require(h > 0.0, ErrorKind::kInvalidParameter, "step size must be positive");
  if (scheme == Scheme::kProjectedEuler) return clamp(dyn, s + h * pre(dyn, s));
  const Vector k1 = pre(dyn, s);
  const Vector k2 = pre(dyn, clamp(dyn, s + 0.5 * h * k1));
  const Vector k3 = pre(dyn, clamp(dyn, s + 0.5 * h * k2));
  const Vector k4 = pre(dyn, clamp(dyn, s + h * k3));
  return clamp(dyn, s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

Trajectory integrate(const Dynamics& dyn, const Vector& s0, const IntegratorConfig& config,
                     const std::vector<Probe>& probes, const ResidualFn& residual) {
  require(config.h > 0.0, ErrorKind::kInvalidParameter, "h must be positive");
  require(config.horizon >= config.h, ErrorKind::kInvalidParameter, "horizon must be >= h");
  require(config.record_stride >= 1, ErrorKind::kInvalidParameter, "record_stride must be >= 1");
  require(dyn.admissible(s0), ErrorKind::kInvalidState, "initial state is not admissible");
  if (config.stop_on) {
    require(residual != nullptr, ErrorKind::kInvalidInput,
            "a stop rule needs a residual function");
    require(config.stop_on->window >= 1, ErrorKind::kInvalidParameter,
            "stop window must be >= 1");
  }

  Trajectory traj;
  traj.layout = dyn.layout();
  const long total = static_cast<long>(std::ceil(config.horizon / config.h - 1e-9));
  traj.h = config.horizon / static_cast<double>(total);
  for (const Probe& p : probes) traj.probe_names.push_back(p.name);
  traj.probe_values.resize(probes.size());

  auto record = [&](double t, const Vector& s) {
    traj.times.push_back(t);
    traj.states.push_back(s);
    for (std::size_t p = 0; p < probes.size(); ++p) {
      traj.probe_values[p].push_back(probes[p].fn(t, s));
    }
  };

  Vector s = s0;
  record(0.0, s);
  const int check_every = config.stop_on ? std::max(1, config.stop_on->window / 10) : 0;
  long below_since = -1;
  traj.reason = TerminalReason::kHorizon;
  long k = 0;
  for (k = 1; k <= total; ++k) {
    Vector next;
    try {
      next = step(dyn, s, traj.h, config.scheme);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kDivergence && e.kind() != ErrorKind::kInvalidState) throw;
      traj.reason = TerminalReason::kDivergence;
      traj.notes.push_back(e.what());
      --k;
      break;
    }
    if (diverged(next)) {
      traj.reason = TerminalReason::kDivergence;
      --k;
      break;
    }
    s = std::move(next);
    const double t = k == total ? config.horizon : static_cast<double>(k) * traj.h;
    bool stop = false;
    if (config.stop_on && k % check_every == 0) {
      const double r = residual(s);
      traj.last_residual = r;
      if (r < config.stop_on->residual_threshold) {
        if (below_since < 0) below_since = k;
        stop = k - below_since >= config.stop_on->window;
      } else {
        below_since = -1;
      }
    }
    if (k % config.record_stride == 0 || k == total || stop) record(t, s);
    if (stop) {
      traj.reason = TerminalReason::kResidual;
      break;
    }
  }
  traj.steps = std::min(k, total);
  traj.final_time = traj.times.back();
  if (traj.reason == TerminalReason::kDivergence) {
    if (traj.times.back() != static_cast<double>(traj.steps) * traj.h && traj.steps > 0) {
      record(static_cast<double>(traj.steps) * traj.h, s);
    }
    traj.final_time = traj.times.back();
  }
  traj.final_state = s;
  if (residual && !traj.last_residual) traj.last_residual = residual(s);
  return traj;
}

GuardedStep guarded_step(const Dynamics& dyn, double h) {
  GuardedStep out;
  out.h = h;
  const MonotonicityReport mono = monotonicity_report(dyn.game(), 200, 0);
  if (mono.theta > 1e3) {
    const double capped = 1.0 / (10.0 * mono.theta);
    if (capped < out.h) {
      std::ostringstream note;
      note << "Lipschitz estimate " << mono.theta << " exceeds 1e3; step reduced from " << out.h
           << " to " << capped;
      out.notes.push_back(note.str());
      out.h = capped;
    }
  }
  const bool coupled = dyn.game().num_rows() > 0 || is_partial(dyn.family());
  if (coupled && dyn.game().num_players() > 1) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(dyn.graph().laplacian(), Eigen::EigenvaluesOnly);
    const double lmax = eig.eigenvalues().maxCoeff();
    if (lmax > 0.0 && 0.5 / lmax < out.h) {
      std::ostringstream note;
      note << "Laplacian spectral radius " << lmax << "; step reduced from " << out.h << " to "
           << 0.5 / lmax;
      out.notes.push_back(note.str());
      out.h = 0.5 / lmax;
    }
  }
  return out;
}

}  // namespace pgne
