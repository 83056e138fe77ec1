#include "pgne/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pgne/cones.hpp"

namespace pgne {

namespace {

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

ResidualBreakdown multiplier_rows(const Game& game, const GraphTopology& graph, const Vector& x,
                                  const Vector& lam, const Vector& z) {
  const int N = game.num_players();
  const int m = game.num_rows();
  require(x.size() == game.total_dim(), ErrorKind::kInvalidInput,
          "kkt_residual: x has the wrong length");
  require(lam.size() == N * m && z.size() == N * m, ErrorKind::kInvalidInput,
          "kkt_residual: lambda and z need length N m");
  require(graph.num_nodes() == N, ErrorKind::kInvalidInput,
          "kkt_residual: graph size does not match the game");
  ResidualBreakdown r;
  if (m == 0) return r;
  const Matrix& L = graph.laplacian();
  const Vector Llam = apply_kron(L, m, lam);
  r.multiplier_consensus = inf_norm(Llam);
  const Vector w = stacked_constraint_values(game, x) - apply_kron(L, m, z) - Llam;
  r.complementarity = complementarity_residual(lam, w);
  return r;
}

void finish(ResidualBreakdown& r) {
  r.total = std::max({r.stationarity, r.multiplier_consensus, r.complementarity});
}

}  // namespace

ResidualBreakdown kkt_residual(const Game& game, const GraphTopology& graph, const Vector& x,
                               const Vector& lam, const Vector& z) {
  ResidualBreakdown r = multiplier_rows(game, graph, x, lam, z);
  r.stationarity =
      inf_norm(pseudo_gradient(game, x) + constraint_gradient_product(game, x, lam));
  finish(r);
  return r;
}

ResidualBreakdown box_kkt_residual(const Game& game, const GraphTopology& graph,
                                   const Vector& x, const Vector& lam, const Vector& z,
                                   const Boxes& boxes) {
  ResidualBreakdown r = multiplier_rows(game, graph, x, lam, z);
  const Vector grad = pseudo_gradient(game, x) + constraint_gradient_product(game, x, lam);
  r.stationarity = inf_norm(x - clamp_to_box(x - grad, boxes.lower, boxes.upper));
  finish(r);
  return r;
}

double max_pairwise_spread(const Vector& v, int num_agents) {
  require(num_agents >= 1 && v.size() % num_agents == 0, ErrorKind::kInvalidInput,
          "max_pairwise_spread: length is not a multiple of the agent count");
  const Eigen::Index d = v.size() / num_agents;
  if (d == 0 || num_agents == 1) return 0.0;
  // max over i, j of ||v_i - v_j||_inf equals the largest per-coordinate range.
  const Eigen::Map<const Matrix> V(v.data(), d, num_agents);
  return (V.rowwise().maxCoeff() - V.rowwise().minCoeff()).maxCoeff();
}

ConsensusErrors consensus_errors(const Dynamics& dyn, const Vector& s) {
  const Outputs o = dyn.outputs(s);
  ConsensusErrors out;
  const int N = dyn.game().num_players();
  out.multiplier = max_pairwise_spread(o.lambda, N);
  if (is_partial(dyn.family())) out.estimate = max_pairwise_spread(o.x_est, N);
  return out;
}

ResidualBreakdown state_residual(const Dynamics& dyn, const Vector& s) {
  const Outputs o = dyn.outputs(s);
  if (dyn.family() == Family::kOfcLocalSet) {
    return box_kkt_residual(dyn.game(), dyn.graph(), o.x, o.lambda, o.z, *dyn.spec().boxes);
  }
  return kkt_residual(dyn.game(), dyn.graph(), o.x, o.lambda, o.z);
}

double monitor_residual(const Dynamics& dyn, const Vector& s) {
  double r = state_residual(dyn, s).total;
  if (is_partial(dyn.family())) {
    r = std::max(r, max_pairwise_spread(dyn.outputs(s).x_est, dyn.game().num_players()));
  }
  return r;
}

ResidualFn make_residual_monitor(const Dynamics& dyn) {
  return [&dyn](const Vector& s) { return monitor_residual(dyn, s); };
}

double storage_value(const Dynamics& dyn, const Vector& s, const Vector& reference) {
  return dyn.storage(s, reference);
}

DissipationReport dissipation_check(const Dynamics& dyn, const Trajectory& traj,
                                    const Vector& reference) {
  DissipationReport rep;
  if (traj.states.empty()) return rep;
  const double eps = std::numeric_limits<double>::epsilon();
  const double w_max = dyn.max_storage_weight();
  std::vector<double> S(traj.states.size());
  std::vector<double> v2(traj.states.size());
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    S[k] = dyn.storage(traj.states[k], reference);
    v2[k] = dyn.evaluate(traj.states[k]).pre_projection.squaredNorm();
  }
  rep.initial_storage = S.front();
  rep.final_storage = S.back();
  rep.worst_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < S.size(); ++k) {
    const double dS = S[k + 1] - S[k];
    const double dt = traj.times[k + 1] - traj.times[k];
    const double tol = 10.0 * traj.h * dt * std::max(v2[k], v2[k + 1]) * w_max +
                       64.0 * eps * std::max(1.0, std::max(S[k], S[k + 1]));
    rep.max_positive_increment = std::max(rep.max_positive_increment, dS);
    if (dS - tol > rep.worst_excess) {
      rep.worst_excess = dS - tol;
      rep.worst_index = static_cast<int>(k);
    }
    if (!(dS <= tol)) rep.passes = false;
  }
  if (S.size() < 2) rep.worst_excess = 0.0;
  return rep;
}

std::vector<double> distance_series(const Dynamics& dyn, const Trajectory& traj,
                                    const Vector& x_star) {
  require(x_star.size() == dyn.game().total_dim(), ErrorKind::kInvalidInput,
          "distance_series: reference has the wrong length");
  const double scale = std::max(1.0, x_star.norm());
  std::vector<double> out;
  out.reserve(traj.states.size());
  for (const Vector& s : traj.states) out.push_back((dyn.outputs(s).x - x_star).norm() / scale);
  return out;
}

}  // namespace pgne
