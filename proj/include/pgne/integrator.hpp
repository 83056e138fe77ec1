#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pgne/dynamics.hpp"

namespace pgne {

enum class Scheme { kProjectedEuler, kProjectedRk4 };
enum class TerminalReason { kHorizon, kResidual, kDivergence };

const char* to_string(Scheme s);
const char* to_string(TerminalReason r);
Scheme scheme_from_string(const std::string& name);

struct StopRule {
  double residual_threshold = 1e-6;
  int window = 100;  // steps the residual must stay below the threshold
};

struct IntegratorConfig {
  double h = 1e-3;
  double horizon = 10.0;
  Scheme scheme = Scheme::kProjectedEuler;
  int record_stride = 1;
  std::optional<StopRule> stop_on;
};

/// Residual used by the stop rule, evaluated on flat states.
using ResidualFn = std::function<double(const Vector&)>;

struct Probe {
  std::string name;
  std::function<double(double t, const Vector& s)> fn;
};

struct Trajectory {
  StateLayout layout;
  std::vector<double> times;
  std::vector<Vector> states;
  TerminalReason reason = TerminalReason::kHorizon;
  double h = 0.0;  // step actually used
  long steps = 0;
  double final_time = 0.0;
  Vector final_state;
  std::vector<std::string> probe_names;
  std::vector<std::vector<double>> probe_values;  // [probe][record]
  std::optional<double> last_residual;
  std::vector<std::string> notes;
};

/// One projected step: s+ = clamp(s + h v_pre) onto the layout bounds. RK4
/// clamps every internal stage the same way.
Vector step(const Dynamics& dyn, const Vector& s, double h,
            Scheme scheme = Scheme::kProjectedEuler);

/// Fixed-step integration over [0, horizon]. The step is shrunk to
/// horizon / ceil(horizon / h) so the last step lands on the horizon.
Trajectory integrate(const Dynamics& dyn, const Vector& s0, const IntegratorConfig& config,
                     const std::vector<Probe>& probes = {},
                     const ResidualFn& residual = nullptr);

struct GuardedStep {
  double h = 0.0;
  std::vector<std::string> notes;
};

/// Explicit-Euler safeguards: h <= 1/(10 theta) when the Lipschitz estimate
/// theta exceeds 1e3, and h <= 0.5/lambda_max(L) when Laplacian coupling is
/// present.
GuardedStep guarded_step(const Dynamics& dyn, double h);

}  // namespace pgne
