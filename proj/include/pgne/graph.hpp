#pragma once

#include <string>
#include <vector>

#include "pgne/common.hpp"

namespace pgne {

struct Edge {
  int i = 0;
  int j = 0;
  double weight = 1.0;
};

/// Weighted undirected communication graph. Each edge is stored once; the
/// Laplacian is symmetric by construction.
class GraphTopology {
 public:
  GraphTopology(int num_nodes, std::vector<Edge> edges);

  static GraphTopology path(int n, double weight = 1.0);
  static GraphTopology cycle(int n, double weight = 1.0);
  static GraphTopology complete(int n, double weight = 1.0);
  static GraphTopology star(int n, double weight = 1.0);
  /// Named generator: "path", "cycle", "complete" or "star".
  static GraphTopology generate(const std::string& name, int n, double weight = 1.0);

  int num_nodes() const { return num_nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Matrix& laplacian() const { return laplacian_; }

  /// Same topology with every weight multiplied by `factor`.
  GraphTopology scaled(double factor) const;

 private:
  int num_nodes_;
  std::vector<Edge> edges_;
  Matrix laplacian_;
};

Matrix laplacian(const GraphTopology& g);

/// L (x) I_d.
Matrix kron_lift(const Matrix& L, int d);

/// (L (x) I_d) v without forming the lift: with V the d x N matrix whose
/// columns are the agent blocks of v, the result is V L^T.
Vector apply_kron(const Matrix& L, int d, const Vector& v);

struct Connectivity {
  bool connected = false;
  double lambda2 = 0.0;
};

Connectivity connectivity_and_fiedler(const GraphTopology& g);

struct PartialInfoReport {
  bool holds = false;
  double lambda2 = 0.0;
  double threshold = 0.0;
  double suggested_scale = 1.0;
};

/// Tests lambda2 > theta^2/mu + theta and proposes a weight scale c >= 1 with
/// c * lambda2 = 1.1 * threshold when the test fails.
PartialInfoReport check_partial_info_condition(const GraphTopology& g, double theta,
                                               double mu);

}  // namespace pgne
