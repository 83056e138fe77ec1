#include "pgne/graph.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <utility>

namespace pgne {

GraphTopology::GraphTopology(int num_nodes, std::vector<Edge> edges)
    : num_nodes_(num_nodes), edges_(std::move(edges)) {
  require(num_nodes_ >= 1, ErrorKind::kInvalidInput, "a graph needs at least one node");
  std::set<std::pair<int, int>> seen;
  laplacian_ = Matrix::Zero(num_nodes_, num_nodes_);
  for (const Edge& e : edges_) {
    require(e.i >= 0 && e.i < num_nodes_ && e.j >= 0 && e.j < num_nodes_,
            ErrorKind::kInvalidInput, "edge endpoint out of range");
    require(e.i != e.j, ErrorKind::kInvalidInput, "self-loops are not allowed");
    require(e.weight > 0.0, ErrorKind::kInvalidInput, "edge weights must be positive");
    const auto key = std::minmax(e.i, e.j);
    require(seen.insert(key).second, ErrorKind::kInvalidInput,
            "duplicate edge " + std::to_string(key.first) + "-" + std::to_string(key.second));
    laplacian_(e.i, e.j) -= e.weight;
    laplacian_(e.j, e.i) -= e.weight;
    laplacian_(e.i, e.i) += e.weight;
    laplacian_(e.j, e.j) += e.weight;
  }
}

GraphTopology GraphTopology::path(int n, double weight) {
  std::vector<Edge> edges;
  for (int k = 0; k + 1 < n; ++k) edges.push_back({k, k + 1, weight});
  return GraphTopology(n, std::move(edges));
}

GraphTopology GraphTopology::cycle(int n, double weight) {
  if (n < 3) return path(n, weight);
  std::vector<Edge> edges;
  for (int k = 0; k < n; ++k) edges.push_back({k, (k + 1) % n, weight});
  return GraphTopology(n, std::move(edges));
}

GraphTopology GraphTopology::complete(int n, double weight) {
  std::vector<Edge> edges;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) edges.push_back({a, b, weight});
  }
  return GraphTopology(n, std::move(edges));
}

GraphTopology GraphTopology::star(int n, double weight) {
  std::vector<Edge> edges;
  for (int k = 1; k < n; ++k) edges.push_back({0, k, weight});
  return GraphTopology(n, std::move(edges));
}

GraphTopology GraphTopology::generate(const std::string& name, int n, double weight) {
  if (name == "path") return path(n, weight);
  if (name == "cycle") return cycle(n, weight);
  if (name == "complete") return complete(n, weight);
  if (name == "star") return star(n, weight);
  throw Error(ErrorKind::kInvalidInput, "unknown graph generator '" + name + "'");
}

GraphTopology GraphTopology::scaled(double factor) const {
  require(factor > 0.0, ErrorKind::kInvalidParameter, "weight scale must be positive");
  std::vector<Edge> edges = edges_;
  for (Edge& e : edges) e.weight *= factor;
  return GraphTopology(num_nodes_, std::move(edges));
}

Matrix laplacian(const GraphTopology& g) { return g.laplacian(); }

Matrix kron_lift(const Matrix& L, int d) {
  require(d >= 1, ErrorKind::kInvalidInput, "kron_lift needs d >= 1");
  const int N = static_cast<int>(L.rows());
  Matrix out = Matrix::Zero(N * d, N * d);
  for (int a = 0; a < N; ++a) {
    for (int b = 0; b < N; ++b) {
      if (L(a, b) != 0.0) {
        out.block(a * d, b * d, d, d) = L(a, b) * Matrix::Identity(d, d);
      }
    }
  }
  return out;
}

Vector apply_kron(const Matrix& L, int d, const Vector& v) {
  const int N = static_cast<int>(L.rows());
  require(v.size() == static_cast<Eigen::Index>(N) * d, ErrorKind::kInvalidInput,
          "apply_kron: vector length does not match the lift");
  Vector out(v.size());
  if (d == 0) return out;
  Eigen::Map<const Matrix> V(v.data(), d, N);
  Eigen::Map<Matrix> W(out.data(), d, N);
  W.noalias() = V * L.transpose();
  return out;
}

Connectivity connectivity_and_fiedler(const GraphTopology& g) {
  Connectivity out;
  if (g.num_nodes() == 1) {
    // A lone agent is trivially connected; there is no second eigenvalue.
    out.connected = true;
    out.lambda2 = 0.0;
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(g.laplacian(), Eigen::EigenvaluesOnly);
  out.lambda2 = std::max(0.0, eig.eigenvalues()(1));
  out.connected = out.lambda2 > 1e-10;
  return out;
}

PartialInfoReport check_partial_info_condition(const GraphTopology& g, double theta,
                                               double mu) {
  require(mu > 0.0, ErrorKind::kInapplicable,
          "the graph condition needs a strongly monotone pseudo-gradient (mu > 0)");
  require(theta > 0.0, ErrorKind::kInvalidParameter, "theta must be positive");
  PartialInfoReport report;
  report.lambda2 = connectivity_and_fiedler(g).lambda2;
  report.threshold = theta * theta / mu + theta;
  report.holds = report.lambda2 > report.threshold;
  if (report.lambda2 <= 1e-10) {
    report.suggested_scale = std::numeric_limits<double>::infinity();
  } else {
    report.suggested_scale = std::max(1.0, 1.1 * report.threshold / report.lambda2);
  }
  return report;
}

}  // namespace pgne
