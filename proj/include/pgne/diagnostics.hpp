#pragma once

#include <optional>
#include <vector>

#include "pgne/dynamics.hpp"
#include "pgne/integrator.hpp"

namespace pgne {

struct ResidualBreakdown {
  double stationarity = 0.0;          // ||F(x) + grad G(x)^T lambda||_inf
  double multiplier_consensus = 0.0;  // ||L lambda||_inf
  double complementarity = 0.0;       // with w = G(x) - L z - L lambda
  double total = 0.0;                 // max of the three
};

/// Residual of the equilibrium conditions of the full-information dynamics.
/// lam and z have length N m; L is the graph Laplacian lifted to m rows.
ResidualBreakdown kkt_residual(const Game& game, const GraphTopology& graph, const Vector& x,
                               const Vector& lam, const Vector& z);

/// Same as kkt_residual with the stationarity row replaced by the natural
/// residual ||x - clamp(x - (F(x) + grad G(x)^T lambda))||_inf on the boxes.
ResidualBreakdown box_kkt_residual(const Game& game, const GraphTopology& graph,
                                   const Vector& x, const Vector& lam, const Vector& z,
                                   const Boxes& boxes);

struct ConsensusErrors {
  double multiplier = 0.0;          // max pairwise ||lambda^i - lambda^j||_inf
  std::optional<double> estimate;   // max pairwise ||x^i - x^j||_inf (partial families)
};

ConsensusErrors consensus_errors(const Dynamics& dyn, const Vector& s);

/// Max pairwise infinity-norm distance between the N agent blocks of v.
double max_pairwise_spread(const Vector& v, int num_agents);

/// kkt_residual on the outputs of a flat state (box-aware for the local-set
/// family).
ResidualBreakdown state_residual(const Dynamics& dyn, const Vector& s);

/// max(state_residual total, estimate consensus); the quantity monitored by
/// the stop rule.
double monitor_residual(const Dynamics& dyn, const Vector& s);
ResidualFn make_residual_monitor(const Dynamics& dyn);

double storage_value(const Dynamics& dyn, const Vector& s, const Vector& reference);

struct DissipationReport {
  double max_positive_increment = 0.0;
  double worst_excess = 0.0;  // largest increment minus its tolerance
  int worst_index = -1;       // interval [worst_index, worst_index + 1]
  bool passes = true;
  double initial_storage = 0.0;
  double final_storage = 0.0;
};

/// Checks that storage does not grow along the recorded trajectory beyond a
/// step-proportional tolerance
/// 10 h dt max(|v_pre|^2) w_max + 64 eps max(1, S)
/// per recorded interval of length dt, with w_max the largest storage weight.
DissipationReport dissipation_check(const Dynamics& dyn, const Trajectory& traj,
                                    const Vector& reference);

/// ||x(t) - x*|| / max(1, ||x*||) along the trajectory.
std::vector<double> distance_series(const Dynamics& dyn, const Trajectory& traj,
                                    const Vector& x_star);

}  // namespace pgne
