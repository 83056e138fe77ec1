#include "pgne/benchmarks.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

namespace pgne {

UniformSource::UniformSource(std::uint64_t seed) : engine_(seed) {}

double UniformSource::next() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double UniformSource::next(double lo, double hi) { return lo + (hi - lo) * next(); }

Matrix condition_positive_definite(const Matrix& raw) {
  require(raw.rows() == raw.cols(), ErrorKind::kInvalidInput, "matrix must be square");
  Matrix M = 0.5 * (raw + raw.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(M, Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues().minCoeff();
  if (lmin <= 0.0) M += (std::abs(lmin) + 0.1) * Matrix::Identity(M.rows(), M.cols());
  return M;
}

Game make_zero_sum_example(double regularization) {
  AffineGradient f;
  f.M = (Matrix(2, 2) << regularization, 1.0, -1.0, regularization).finished();
  f.c = Vector::Zero(2);
  Game::Definition def;
  def.name = regularization == 0.0 ? "zero_sum" : "zero_sum_regularized";
  def.action_dims = {1, 1};
  def.num_rows = 0;
  def.affine = f;
  def.gradient = [f](int i, const Vector& x) -> Vector {
    return f.M.row(i) * x + f.c.segment(i, 1);
  };
  def.cost = [r = regularization](int i, const Vector& x) {
    const double s = i == 0 ? 1.0 : -1.0;
    return s * x(0) * x(1) + 0.5 * r * x(i) * x(i);
  };
  return Game(std::move(def));
}

CournotInstance make_cournot(std::uint64_t seed) {
  constexpr int N = CournotData::kFirms;
  constexpr int K = CournotData::kMarkets;
  UniformSource rng(seed);
  CournotData d;
  for (int i = 0; i < N; ++i) {
    std::vector<int> joined;
    for (int k = 0; k < K; ++k) {
      if (rng.next() < 0.5) joined.push_back(k);
    }
    if (joined.empty()) joined.push_back(std::min(K - 1, static_cast<int>(rng.next() * K)));
    const int ni = static_cast<int>(joined.size());
    Matrix Ai = Matrix::Zero(K, ni);
    for (int j = 0; j < ni; ++j) Ai(joined[j], j) = 1.0;
    Matrix Qraw(ni, ni);
    for (int r = 0; r < ni; ++r) {
      for (int c = 0; c < ni; ++c) Qraw(r, c) = rng.next(1.0, 4.0);
    }
    Vector qi(ni), ri(K), ui(ni);
    for (int j = 0; j < ni; ++j) qi(j) = rng.next(0.0, 2.0);
    for (int k = 0; k < K; ++k) ri(k) = rng.next(20.0, 30.0);
    for (int j = 0; j < ni; ++j) ui(j) = rng.next(6.0, 14.0);
    d.markets.push_back(joined);
    d.A.push_back(Ai);
    d.Q.push_back(condition_positive_definite(Qraw));
    d.q.push_back(qi);
    d.r.push_back(ri);
    d.u.push_back(ui);
  }
  d.P_bar.resize(K);
  for (int k = 0; k < K; ++k) d.P_bar(k) = rng.next(10.0, 14.0);
  Matrix Xraw(K, K);
  for (int r = 0; r < K; ++r) {
    for (int c = 0; c < K; ++c) Xraw(r, c) = rng.next(1.0, 2.0);
  }
  d.Xi = condition_positive_definite(Xraw);

  std::vector<int> dims;
  std::vector<int> offsets;
  int n = 0;
  for (int i = 0; i < N; ++i) {
    offsets.push_back(n);
    dims.push_back(static_cast<int>(d.markets[i].size()));
    n += dims.back();
  }
  Matrix Afull = Matrix::Zero(K, n);
  for (int i = 0; i < N; ++i) Afull.middleCols(offsets[i], dims[i]) = d.A[i];

  // grad_i J_i = 2 Q_i x^i + q_i - A_i^T Pbar + A_i^T Xi A x + A_i^T Xi^T A_i x^i
  AffineGradient f;
  f.M = Matrix::Zero(n, n);
  f.c = Vector::Zero(n);
  for (int i = 0; i < N; ++i) {
    const int o = offsets[i], ni = dims[i];
    f.M.middleRows(o, ni) = d.A[i].transpose() * d.Xi * Afull;
    f.M.block(o, o, ni, ni) += 2.0 * d.Q[i] + d.A[i].transpose() * d.Xi.transpose() * d.A[i];
    f.c.segment(o, ni) = d.q[i] - d.A[i].transpose() * d.P_bar;
  }

  const int m = K + 2 * n;
  LinearConstraints lin;
  for (int i = 0; i < N; ++i) {
    const int o = offsets[i], ni = dims[i];
    Matrix Ai = Matrix::Zero(m, ni);
    Vector bi = Vector::Zero(m);
    Ai.topRows(K) = d.A[i];
    bi.head(K) = d.r[i];
    Ai.block(K + o, 0, ni, ni) = Matrix::Identity(ni, ni);
    bi.segment(K + o, ni) = d.u[i];
    Ai.block(K + n + o, 0, ni, ni) = -Matrix::Identity(ni, ni);
    lin.A.push_back(Ai);
    lin.b.push_back(bi);
  }

  Game quad = Game::quadratic("cournot", dims, f, lin);
  Game::Definition def;
  def.name = "cournot";
  def.action_dims = dims;
  def.num_rows = m;
  def.affine = f;
  def.linear = lin;
  def.gradient = [quad](int i, const Vector& x) { return quad.player_gradient(i, x); };
  def.constraint = [quad](int i, const Vector& xi) { return quad.constraint(i, xi); };
  def.jacobian = [quad](int i, const Vector& xi) { return quad.constraint_jacobian(i, xi); };
  def.cost = [d, offsets, dims, Afull](int i, const Vector& x) {
    const Vector xi = x.segment(offsets[i], dims[i]);
    const Vector price = d.P_bar - d.Xi * (Afull * x);
    return xi.dot(d.Q[i] * xi) + d.q[i].dot(xi) - price.dot(d.A[i] * xi);
  };
  return {Game(std::move(def)), std::move(d)};
}

Game make_sensor_network(std::uint64_t seed, double d_target) {
  constexpr int N = 6;
  constexpr int dim = 2;
  require(d_target > 0.0, ErrorKind::kInvalidParameter, "distance budget must be positive");
  UniformSource rng(seed);
  std::vector<Matrix> Q;
  std::vector<Vector> q;
  for (int i = 0; i < N; ++i) {
    Matrix raw(dim, dim);
    for (int r = 0; r < dim; ++r) {
      for (int c = 0; c < dim; ++c) raw(r, c) = rng.next(-6.0, 6.0);
    }
    Vector qi(dim);
    for (int k = 0; k < dim; ++k) qi(k) = rng.next(-3.0, 3.0);
    Q.push_back(condition_positive_definite(raw));
    q.push_back(qi);
  }
  const int n = N * dim;
  // F_i = 2 Q_i x^i + q_i + 2 sum_j (x^i - x^j)
  AffineGradient f;
  f.M = Matrix::Zero(n, n);
  f.c = Vector::Zero(n);
  for (int i = 0; i < N; ++i) {
    f.M.block(i * dim, i * dim, dim, dim) = 2.0 * Q[i];
    f.c.segment(i * dim, dim) = q[i];
    for (int j = 0; j < N; ++j) {
      if (j == i) continue;
      f.M.block(i * dim, i * dim, dim, dim) += 2.0 * Matrix::Identity(dim, dim);
      f.M.block(i * dim, j * dim, dim, dim) -= 2.0 * Matrix::Identity(dim, dim);
    }
  }
  Game::Definition def;
  def.name = "sensor_network";
  def.action_dims.assign(N, dim);
  def.num_rows = 1;
  def.affine = f;
  def.gradient = [f](int i, const Vector& x) -> Vector {
    return f.M.middleRows(i * dim, dim) * x + f.c.segment(i * dim, dim);
  };
  def.cost = [Q, q](int i, const Vector& x) {
    const Vector xi = x.segment(i * dim, dim);
    double c = xi.dot(Q[i] * xi) + q[i].dot(xi);
    for (int j = 0; j < N; ++j) c += (xi - x.segment(j * dim, dim)).squaredNorm();
    return c;
  };
  def.constraint = [d_target](int, const Vector& xi) -> Vector {
    return Vector::Constant(1, xi.squaredNorm() / N - d_target / N);
  };
  def.jacobian = [](int, const Vector& xi) -> Matrix {
    return (2.0 / N) * xi.transpose();
  };
  return Game(std::move(def));
}

Game make_box_example() {
  AffineGradient f;
  f.M = (Matrix(2, 2) << 2.0, 1.0, -1.0, 2.0).finished();
  f.c = (Vector(2) << -4.0, 0.0).finished();
  Game::Definition def;
  def.name = "box_example";
  def.action_dims = {1, 1};
  def.affine = f;
  def.gradient = [f](int i, const Vector& x) -> Vector {
    return f.M.row(i) * x + f.c.segment(i, 1);
  };
  def.cost = [](int i, const Vector& x) {
    return i == 0 ? x(0) * x(0) + x(0) * x(1) - 4.0 * x(0) : x(1) * x(1) - x(0) * x(1);
  };
  return Game(std::move(def));
}

Boxes box_example_bounds() { return {Vector::Zero(2), Vector::Ones(2)}; }

}  // namespace pgne
