#include "pgne/dynamics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "pgne/cones.hpp"

namespace pgne {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Matrix blkdiag(const std::vector<const Matrix*>& blocks) {
  Eigen::Index rows = 0, cols = 0;
  for (const Matrix* b : blocks) {
    rows += b->rows();
    cols += b->cols();
  }
  Matrix out = Matrix::Zero(rows, cols);
  Eigen::Index r = 0, c = 0;
  for (const Matrix* b : blocks) {
    out.block(r, c, b->rows(), b->cols()) = *b;
    r += b->rows();
    c += b->cols();
  }
  return out;
}

ChannelKind family_kind(Family f) {
  switch (f) {
    case Family::kGp:
    case Family::kPartialGp:
      return ChannelKind::kIntegrator;
    case Family::kPfc:
    case Family::kPartialPfc:
      return ChannelKind::kParallel;
    case Family::kOfc:
    case Family::kPartialOfc:
    case Family::kOfcLocalSet:
      return ChannelKind::kFeedback;
    case Family::kGeneralized:
    case Family::kPartialGeneralizedNocon:
      return ChannelKind::kGeneralized;
  }
  return ChannelKind::kIntegrator;
}

std::vector<LtiBlock> expand_blocks(const std::vector<LtiBlock>& blocks,
                                    const std::vector<int>& io_dims, const char* role) {
  const std::size_t N = io_dims.size();
  if (blocks.empty()) return {};
  require(blocks.size() == 1 || blocks.size() == N, ErrorKind::kInvalidInput,
          std::string(role) + " channel: expected one block or one block per agent");
  std::vector<LtiBlock> out;
  out.reserve(N);
  for (std::size_t i = 0; i < N; ++i) {
    const LtiBlock& b = blocks.size() == 1 ? blocks[0] : blocks[i];
    require(b.io_dim() == io_dims[i], ErrorKind::kInvalidInput,
            std::string(role) + " channel: block '" + b.name + "' for agent " +
                std::to_string(i) + " has io dimension " + std::to_string(b.io_dim()) +
                ", expected " + std::to_string(io_dims[i]));
    out.push_back(b);
  }
  return out;
}

double max_abs(const Matrix& M) { return M.size() == 0 ? 0.0 : M.cwiseAbs().maxCoeff(); }

double max_sym_eig(const Matrix& M) {
  if (M.size() == 0) return -kInf;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

bool same_matrix(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

bool same_realization(const LtiBlock& a, const LtiBlock& b) {
  return a.name == b.name && same_matrix(a.A, b.A) && same_matrix(a.B, b.B) &&
         same_matrix(a.C, b.C) && same_matrix(a.D, b.D) && a.P.has_value() == b.P.has_value() &&
         (!a.P || same_matrix(*a.P, *b.P));
}

std::string block_label(char role, const LtiBlock& b) {
  const char* r = role == 'x' ? "x" : (role == 'l' ? "lambda" : "z");
  return std::string(r) + " block '" + b.name + "'";
}

void gate_block(char role, ChannelKind kind, const LtiBlock& b, GateReport& report) {
  auto fail = [&](const std::string& why) {
    report.ok = false;
    report.failures.push_back(block_label(role, b) + ": " + why);
  };
  const auto grid = default_frequency_grid();
  const bool lambda = role == 'l';
  switch (kind) {
    case ChannelKind::kIntegrator:
      fail("this family takes no compensator blocks");
      return;
    case ChannelKind::kParallel:
      if (lambda) {
        const std::string why = projected_structure_violation(b);
        if (!why.empty()) fail(why);
        if (b.state_dim() > 0 && max_sym_eig(b.A) >= -1e-12) {
          fail("strict passivity needs A negative definite");
        }
      } else {
        if (!check_positive_real(b, grid).spr) fail("check_strictly_positive_real failed");
        if (b.io_dim() > 0 && max_sym_eig(-(b.D + b.D.transpose())) > 1e-12) {
          fail("feedthrough needs D + D^T positive semidefinite");
        }
      }
      return;
    case ChannelKind::kFeedback:
      try {
        if (!check_zero_dc_gain(b)) fail("check_zero_dc_gain failed");
      } catch (const Error& e) {
        fail(std::string("check_zero_dc_gain failed (") + e.what() + ")");
      }
      if (!check_output_strict_passivity(b, grid).holds) {
        fail("check_output_strict_passivity failed");
      }
      return;
    case ChannelKind::kGeneralized:
      if (lambda) {
        const std::string why = projected_structure_violation(b);
        if (!why.empty()) fail(why);
      } else {
        if (!check_positive_real(b, grid).pr) fail("check_positive_real failed");
        if (max_abs(b.D) != 0.0) fail("generalized blocks need D = 0");
      }
      try {
        solve_regulator_equations(b, lambda);
      } catch (const Error& e) {
        fail(std::string("solve_regulator_equations failed (") + e.what() + ")");
      }
      return;
  }
}

}  // namespace

const char* to_string(Family f) {
  switch (f) {
    case Family::kGp: return "gp";
    case Family::kPfc: return "pfc";
    case Family::kOfc: return "ofc";
    case Family::kGeneralized: return "generalized";
    case Family::kPartialGp: return "partial_gp";
    case Family::kPartialPfc: return "partial_pfc";
    case Family::kPartialOfc: return "partial_ofc";
    case Family::kPartialGeneralizedNocon: return "partial_generalized_nocon";
    case Family::kOfcLocalSet: return "ofc_local_set";
  }
  return "gp";
}

Family family_from_string(const std::string& name) {
  std::string key;
  for (char ch : name) {
    key.push_back(ch == '-' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  for (Family f : {Family::kGp, Family::kPfc, Family::kOfc, Family::kGeneralized,
                   Family::kPartialGp, Family::kPartialPfc, Family::kPartialOfc,
                   Family::kPartialGeneralizedNocon, Family::kOfcLocalSet}) {
    if (key == to_string(f)) return f;
  }
  throw Error(ErrorKind::kUnsupportedFamily, "unknown dynamics family '" + name + "'");
}

bool is_partial(Family f) {
  return f == Family::kPartialGp || f == Family::kPartialPfc || f == Family::kPartialOfc ||
         f == Family::kPartialGeneralizedNocon;
}

// ---------------------------------------------------------------------------
// StateLayout

int StateLayout::add(std::string name, int length) {
  require(length >= 0, ErrorKind::kInvalidInput, "negative segment length");
  require(!has(name), ErrorKind::kInvalidInput, "duplicate segment '" + name + "'");
  segments_.push_back({std::move(name), dim_, length});
  dim_ += length;
  lower_.conservativeResize(dim_);
  upper_.conservativeResize(dim_);
  lower_.tail(length).setConstant(-kInf);
  upper_.tail(length).setConstant(kInf);
  return static_cast<int>(segments_.size()) - 1;
}

void StateLayout::set_bounds(const std::string& name, const Vector& lower, const Vector& upper) {
  const Segment& seg = segment(name);
  require(lower.size() == seg.length && upper.size() == seg.length, ErrorKind::kInvalidInput,
          "bounds for '" + name + "' have the wrong length");
  require((lower.array() <= upper.array()).all(), ErrorKind::kInvalidInput,
          "bounds for '" + name + "' need lower <= upper");
  lower_.segment(seg.offset, seg.length) = lower;
  upper_.segment(seg.offset, seg.length) = upper;
}

void StateLayout::set_nonnegative(const std::string& name) {
  const Segment& seg = segment(name);
  set_bounds(name, Vector::Zero(seg.length), Vector::Constant(seg.length, kInf));
}

bool StateLayout::has(const std::string& name) const {
  return std::any_of(segments_.begin(), segments_.end(),
                     [&](const Segment& s) { return s.name == name; });
}

const Segment& StateLayout::segment(const std::string& name) const {
  for (const Segment& s : segments_) {
    if (s.name == name) return s;
  }
  throw Error(ErrorKind::kInvalidInput, "no segment named '" + name + "'");
}

Vector StateLayout::view(const Vector& s, const std::string& name) const {
  const Segment& seg = segment(name);
  return s.segment(seg.offset, seg.length);
}

bool StateLayout::projected(int k) const {
  return std::isfinite(lower_(k)) || std::isfinite(upper_(k));
}

std::vector<bool> StateLayout::projected_mask() const {
  std::vector<bool> mask(dim_);
  for (int k = 0; k < dim_; ++k) mask[k] = projected(k);
  return mask;
}

std::vector<std::string> StateLayout::component_names() const {
  std::vector<std::string> names;
  names.reserve(dim_);
  for (const Segment& s : segments_) {
    for (int k = 0; k < s.length; ++k) names.push_back(s.name + "[" + std::to_string(k) + "]");
  }
  return names;
}

// ---------------------------------------------------------------------------
// Gate

GateReport verify_family_requirements(const DynamicsSpec& spec) {
  GateReport report;
  const ChannelKind kind = family_kind(spec.family);
  auto gate_channel = [&](char role, const std::vector<LtiBlock>& blocks) {
    // Per-agent copies of one block share a verdict; check each distinct block once.
    std::vector<const LtiBlock*> seen;
    for (const LtiBlock& b : blocks) {
      const bool repeat = std::any_of(seen.begin(), seen.end(), [&](const LtiBlock* o) {
        return same_realization(*o, b);
      });
      if (repeat) continue;
      seen.push_back(&b);
      gate_block(role, kind, b, report);
    }
  };
  gate_channel('x', spec.compensators.x);
  gate_channel('l', spec.compensators.lambda);
  gate_channel('z', spec.compensators.z);
  if (spec.family == Family::kPartialGeneralizedNocon &&
      (!spec.compensators.lambda.empty() || !spec.compensators.z.empty())) {
    report.ok = false;
    report.failures.push_back("partial_generalized_nocon takes x blocks only");
  }
  return report;
}

// ---------------------------------------------------------------------------
// Dynamics

Dynamics::Dynamics(DynamicsSpec spec) : spec_(std::move(spec)) {
  const GateReport gate = verify_family_requirements(spec_);
  if (!gate.ok) {
    std::string what = "compensator gate failed: ";
    for (std::size_t k = 0; k < gate.failures.size(); ++k) {
      what += (k ? "; " : "") + gate.failures[k];
    }
    throw Error(ErrorKind::kInvalidParameter, what);
  }
  build();
}

Dynamics::Dynamics(DynamicsSpec spec, Unchecked) : spec_(std::move(spec)) { build(); }

Dynamics Dynamics::unchecked(DynamicsSpec spec) { return Dynamics(std::move(spec), Unchecked{}); }

void Dynamics::build() {
  const Game& g = spec_.game;
  const int N = g.num_players();
  const int n = g.total_dim();
  const int m = g.num_rows();
  require(spec_.graph.num_nodes() == N, ErrorKind::kInvalidInput,
          "graph has " + std::to_string(spec_.graph.num_nodes()) + " nodes for " +
              std::to_string(N) + " players");
  const Family fam = spec_.family;
  const bool partial = is_partial(fam);

  if (fam == Family::kPartialGeneralizedNocon) {
    require(m == 0, ErrorKind::kUnsupportedFamily,
            "partial_generalized_nocon needs a game without coupled constraints");
    auto blocks = expand_blocks(spec_.compensators.x, g.action_dims(), "x");
    if (blocks.empty()) {
      for (int i = 0; i < N; ++i) blocks.push_back(integrator_block(g.action_dim(i)));
    }
    ChannelData c;
    c.kind = ChannelKind::kGeneralized;
    std::vector<const Matrix*> As, Bs, Cs, Ps;
    bool all_p = true;
    std::vector<Matrix> pis;
    bool regulator_ok = true;
    for (const LtiBlock& b : blocks) {
      As.push_back(&b.A);
      Bs.push_back(&b.B);
      Cs.push_back(&b.C);
      if (b.P) Ps.push_back(&*b.P); else all_p = false;
      try {
        pis.push_back(solve_regulator_equations(b));
      } catch (const Error&) {
        regulator_ok = false;
      }
    }
    c.A = blkdiag(As);
    c.B = blkdiag(Bs);
    c.C = blkdiag(Cs);
    if (all_p) c.P = blkdiag(Ps);
    if (regulator_ok) {
      std::vector<const Matrix*> pp;
      for (const Matrix& p : pis) pp.push_back(&p);
      c.Pi = blkdiag(pp);
    }
    c.state_dim = static_cast<int>(c.A.rows());
    c.io_dim = n;
    c.sA = c.A.sparseView();
    c.sB = c.B.sparseView();
    c.sC = c.C.sparseView();
    nocon_theta_ = layout_.add("theta_r", c.state_dim);
    nocon_xs_ = layout_.add("x_s", (N - 1) * n);
    c.main_segment = nocon_theta_;
    if (c.P) weights_.push_back({nocon_theta_, *c.P});
    else weights_.push_back({nocon_theta_, Matrix()});
    weights_.push_back({nocon_xs_, Matrix::Identity((N - 1) * n, (N - 1) * n)});
    channels_.push_back(std::move(c));
    return;
  }

  const ChannelKind fk = family_kind(fam);
  auto make_channel = [&](char role, const std::vector<LtiBlock>& given,
                          const std::vector<int>& io_dims, const std::string& base) {
    const char* label = role == 'x' ? "x" : (role == 'l' ? "lambda" : "z");
    auto blocks = expand_blocks(given, io_dims, label);
    ChannelData c;
    c.role = role;
    c.projected = role == 'l';
    c.kind = blocks.empty() ? ChannelKind::kIntegrator : fk;
    for (int d : io_dims) c.io_dim += d;
    if (!blocks.empty()) {
      std::vector<const Matrix*> As, Bs, Cs, Ds, Ps;
      bool all_p = true;
      for (const LtiBlock& b : blocks) {
        As.push_back(&b.A);
        Bs.push_back(&b.B);
        Cs.push_back(&b.C);
        Ds.push_back(&b.D);
        if (b.P) Ps.push_back(&*b.P); else all_p = false;
      }
      c.A = blkdiag(As);
      c.B = blkdiag(Bs);
      c.C = blkdiag(Cs);
      c.D = blkdiag(Ds);
      c.has_feedthrough = max_abs(c.D) != 0.0;
      if (all_p) c.P = blkdiag(Ps);
      c.state_dim = static_cast<int>(c.A.rows());
      c.sA = c.A.sparseView();
      c.sB = c.B.sparseView();
      c.sC = c.C.sparseView();
      c.sD = c.D.sparseView();
      if (c.kind == ChannelKind::kGeneralized) {
        std::vector<Matrix> pis;
        try {
          for (const LtiBlock& b : blocks) pis.push_back(solve_regulator_equations(b, c.projected));
          std::vector<const Matrix*> pp;
          for (const Matrix& p : pis) pp.push_back(&p);
          c.Pi = blkdiag(pp);
        } catch (const Error&) {
          c.Pi.reset();
        }
      }
    }
    const int io = c.io_dim;
    const Matrix eye_io = Matrix::Identity(io, io);
    auto weight_or_missing = [&]() { return c.P ? *c.P : Matrix(); };
    switch (c.kind) {
      case ChannelKind::kIntegrator:
        c.main_segment = layout_.add(base, io);
        weights_.push_back({c.main_segment, eye_io});
        break;
      case ChannelKind::kParallel:
        c.main_segment = layout_.add("rho_" + base, io);
        c.comp_segment = layout_.add("tau_" + base, c.state_dim);
        weights_.push_back({c.main_segment, eye_io});
        weights_.push_back({c.comp_segment, c.projected
                                                ? Matrix(Matrix::Identity(c.state_dim, c.state_dim))
                                                : weight_or_missing()});
        if (c.projected) layout_.set_nonnegative("tau_" + base);
        break;
      case ChannelKind::kFeedback:
        c.main_segment = layout_.add(base, io);
        c.comp_segment = layout_.add("xi_" + base, c.state_dim);
        weights_.push_back({c.main_segment, eye_io});
        weights_.push_back({c.comp_segment, weight_or_missing()});
        break;
      case ChannelKind::kGeneralized:
        c.main_segment = layout_.add("theta_" + base, c.state_dim);
        weights_.push_back({c.main_segment,
                            c.projected ? Matrix(Matrix::Identity(c.state_dim, c.state_dim))
                                        : weight_or_missing()});
        break;
    }
    if (c.projected) layout_.set_nonnegative(layout_.segments()[c.main_segment].name);
    channels_.push_back(std::move(c));
  };

  std::vector<int> x_dims = g.action_dims();
  if (partial) x_dims.assign(N, n);
  make_channel('x', spec_.compensators.x, x_dims, partial ? "x_est" : "x");
  if (m > 0) {
    const std::vector<int> m_dims(N, m);
    make_channel('l', spec_.compensators.lambda, m_dims, "lam");
    make_channel('z', spec_.compensators.z, m_dims, "z");
  } else {
    require(spec_.compensators.lambda.empty() && spec_.compensators.z.empty(),
            ErrorKind::kInvalidInput,
            "lambda and z blocks were given for a game without coupled constraints");
  }

  if (fam == Family::kOfcLocalSet) {
    require(spec_.boxes.has_value(), ErrorKind::kInvalidInput,
            "ofc_local_set needs per-agent boxes");
    require(spec_.boxes->lower.size() == n && spec_.boxes->upper.size() == n,
            ErrorKind::kInvalidInput, "boxes must have length n");
    layout_.set_bounds(layout_.segments()[channels_[0].main_segment].name, spec_.boxes->lower,
                       spec_.boxes->upper);
  }
}

bool Dynamics::admissible(const Vector& s) const {
  if (s.size() != dim()) return false;
  const Vector& lo = layout_.lower();
  const Vector& hi = layout_.upper();
  for (int k = 0; k < dim(); ++k) {
    if (!std::isfinite(s(k))) return false;
    if (s(k) < lo(k) - kBoundaryTol || s(k) > hi(k) + kBoundaryTol) return false;
  }
  return true;
}

Vector Dynamics::own_blocks(const Vector& x_est) const {
  const Game& g = spec_.game;
  const int n = g.total_dim();
  require(x_est.size() == g.num_players() * n, ErrorKind::kInvalidInput,
          "own_blocks: estimate has the wrong length");
  Vector out(n);
  for (int i = 0; i < g.num_players(); ++i) {
    out.segment(g.offset(i), g.action_dim(i)) =
        x_est.segment(i * n + g.offset(i), g.action_dim(i));
  }
  return out;
}

Vector Dynamics::embed_own(const Vector& v) const {
  const Game& g = spec_.game;
  const int n = g.total_dim();
  require(v.size() == n, ErrorKind::kInvalidInput, "embed_own: vector has the wrong length");
  Vector out = Vector::Zero(g.num_players() * n);
  for (int i = 0; i < g.num_players(); ++i) {
    out.segment(i * n + g.offset(i), g.action_dim(i)) = v.segment(g.offset(i), g.action_dim(i));
  }
  return out;
}

Vector Dynamics::other_blocks(const Vector& x_est) const {
  const Game& g = spec_.game;
  const int N = g.num_players();
  const int n = g.total_dim();
  require(x_est.size() == N * n, ErrorKind::kInvalidInput,
          "other_blocks: estimate has the wrong length");
  Vector out((N - 1) * n);
  int pos = 0;
  for (int i = 0; i < N; ++i) {
    const int before = g.offset(i);
    const int after = n - before - g.action_dim(i);
    out.segment(pos, before) = x_est.segment(i * n, before);
    pos += before;
    out.segment(pos, after) = x_est.segment(i * n + before + g.action_dim(i), after);
    pos += after;
  }
  return out;
}

Vector Dynamics::assemble_estimate(const Vector& own, const Vector& others) const {
  const Game& g = spec_.game;
  const int N = g.num_players();
  const int n = g.total_dim();
  require(own.size() == n && others.size() == (N - 1) * n, ErrorKind::kInvalidInput,
          "assemble_estimate: wrong lengths");
  Vector out(N * n);
  int pos = 0;
  for (int i = 0; i < N; ++i) {
    const int before = g.offset(i);
    const int di = g.action_dim(i);
    const int after = n - before - di;
    out.segment(i * n, before) = others.segment(pos, before);
    pos += before;
    out.segment(i * n + before, di) = own.segment(before, di);
    out.segment(i * n + before + di, after) = others.segment(pos, after);
    pos += after;
  }
  return out;
}

Vector Dynamics::channel_output(const ChannelData& c, const Vector& s, const Vector* v) const {
  const Segment& main = layout_.segments()[c.main_segment];
  const Vector ms = s.segment(main.offset, main.length);
  switch (c.kind) {
    case ChannelKind::kIntegrator:
    case ChannelKind::kFeedback:
      return ms;
    case ChannelKind::kParallel: {
      const Segment& comp = layout_.segments()[c.comp_segment];
      Vector eta = c.sC * s.segment(comp.offset, comp.length);
      if (c.projected) {
        // C = B^T >= 0 and tau >= 0, so the clip is inactive; guard it anyway.
        require(eta.size() == 0 || eta.minCoeff() >= -1e-9, ErrorKind::kInvalidState,
                "projected compensator output went negative");
        eta = eta.cwiseMax(0.0);
      } else if (c.has_feedthrough && v != nullptr) {
        eta += c.sD * (*v);
      }
      return ms + eta;
    }
    case ChannelKind::kGeneralized: {
      Vector y = c.sC * ms;
      if (c.projected) y = y.cwiseMax(0.0);
      return y;
    }
  }
  return ms;
}

void Dynamics::channel_pre(const ChannelData& c, const Vector& s, const Vector& v,
                           const Vector& y, Vector& pre) const {
  const Segment& main = layout_.segments()[c.main_segment];
  switch (c.kind) {
    case ChannelKind::kIntegrator:
      pre.segment(main.offset, main.length) = v;
      return;
    case ChannelKind::kParallel: {
      const Segment& comp = layout_.segments()[c.comp_segment];
      pre.segment(main.offset, main.length) = v;
      pre.segment(comp.offset, comp.length) = c.sA * s.segment(comp.offset, comp.length) + c.sB * v;
      return;
    }
    case ChannelKind::kFeedback: {
      const Segment& comp = layout_.segments()[c.comp_segment];
      const Vector xi = s.segment(comp.offset, comp.length);
      Vector w = c.sC * xi;
      if (c.has_feedthrough) w += c.sD * y;
      pre.segment(main.offset, main.length) = v - w;
      pre.segment(comp.offset, comp.length) = c.sA * xi + c.sB * y;
      return;
    }
    case ChannelKind::kGeneralized:
      pre.segment(main.offset, main.length) = c.sA * s.segment(main.offset, main.length) + c.sB * v;
      return;
  }
}

Vector Dynamics::x_input(const Vector& x_out, const Vector& x_actual, const Vector& lambda) const {
  const Game& g = spec_.game;
  if (!is_partial(spec_.family)) {
    return -pseudo_gradient(g, x_actual) - constraint_gradient_product(g, x_actual, lambda);
  }
  const int n = g.total_dim();
  return -embed_own(extended_pseudo_gradient(g, x_out)) -
         embed_own(constraint_gradient_product(g, x_actual, lambda)) -
         apply_kron(spec_.graph.laplacian(), n, x_out);
}

Outputs Dynamics::outputs(const Vector& s) const {
  require(s.size() == dim(), ErrorKind::kInvalidInput, "state has the wrong length");
  const Game& g = spec_.game;
  const int n = g.total_dim();
  Outputs out;
  if (spec_.family == Family::kPartialGeneralizedNocon) {
    const ChannelData& c = channels_[0];
    const Vector own = c.sC * layout_.view(s, "theta_r");
    out.x_est = assemble_estimate(own, layout_.view(s, "x_s"));
    out.x = own;
    out.lambda = Vector(0);
    out.z = Vector(0);
    return out;
  }
  const int m = g.num_rows();
  const Matrix& L = spec_.graph.laplacian();
  out.lambda = m > 0 ? channel_output(channels_[1], s, nullptr) : Vector(0);
  if (m > 0) {
    const Vector v_z = apply_kron(L, m, out.lambda);
    out.z = channel_output(channels_[2], s, &v_z);
  } else {
    out.z = Vector(0);
  }
  const ChannelData& xc = channels_[0];
  Vector y = channel_output(xc, s, nullptr);
  if (xc.kind == ChannelKind::kParallel && xc.has_feedthrough) {
    // Algebraic loop x = rho + C tau + D v(x), resolved by fixed-point iteration.
    const Vector base = y;
    bool converged = false;
    for (int it = 0; it < 500; ++it) {
      const Vector xa = is_partial(spec_.family) ? own_blocks(y) : y;
      const Vector next = base + xc.sD * x_input(y, xa, out.lambda);
      const double diff = (next - y).cwiseAbs().maxCoeff();
      y = next;
      if (diff <= 1e-13 * std::max(1.0, y.cwiseAbs().maxCoeff())) {
        converged = true;
        break;
      }
    }
    require(converged, ErrorKind::kDivergence,
            "feedthrough loop on the x channel did not converge");
  }
  if (is_partial(spec_.family)) {
    out.x_est = y;
    out.x = own_blocks(y);
  } else {
    out.x = y;
  }
  (void)n;
  return out;
}

FieldEval Dynamics::evaluate(const Vector& s) const {
  require(s.size() == dim(), ErrorKind::kInvalidInput,
          "state has length " + std::to_string(s.size()) + ", layout expects " +
              std::to_string(dim()));
  const Vector& lo = layout_.lower();
  const Vector& hi = layout_.upper();
  for (int k = 0; k < dim(); ++k) {
    if (!(s(k) >= lo(k) - kBoundaryTol && s(k) <= hi(k) + kBoundaryTol)) {
      throw Error(ErrorKind::kInvalidState,
                  "component " + layout_.component_names()[k] + " violates its bounds");
    }
  }
  const Game& g = spec_.game;
  const int n = g.total_dim();
  const Matrix& L = spec_.graph.laplacian();
  FieldEval out;
  out.pre_projection = Vector::Zero(dim());

  if (spec_.family == Family::kPartialGeneralizedNocon) {
    const ChannelData& c = channels_[0];
    const Segment& th = layout_.segments()[nocon_theta_];
    const Segment& xs = layout_.segments()[nocon_xs_];
    const Vector theta = s.segment(th.offset, th.length);
    const Vector x_est = assemble_estimate(c.sC * theta, s.segment(xs.offset, xs.length));
    const Vector Lx = apply_kron(L, n, x_est);
    const Vector u = extended_pseudo_gradient(g, x_est) + own_blocks(Lx);
    out.pre_projection.segment(th.offset, th.length) = c.sA * theta - c.sB * u;
    out.pre_projection.segment(xs.offset, xs.length) = -other_blocks(Lx);
    out.derivative = out.pre_projection;
    return out;
  }

  const int m = g.num_rows();
  const Outputs o = outputs(s);
  const Vector v_x = x_input(is_partial(spec_.family) ? o.x_est : o.x, o.x, o.lambda);
  const Vector& y_x = is_partial(spec_.family) ? o.x_est : o.x;
  channel_pre(channels_[0], s, v_x, y_x, out.pre_projection);
  if (m > 0) {
    const Vector Llam = apply_kron(L, m, o.lambda);
    const Vector v_l = stacked_constraint_values(g, o.x) - apply_kron(L, m, o.z) - Llam;
    channel_pre(channels_[1], s, v_l, o.lambda, out.pre_projection);
    channel_pre(channels_[2], s, Llam, o.z, out.pre_projection);
  }
  out.derivative = out.pre_projection;
  for (int k = 0; k < dim(); ++k) {
    if (s(k) <= lo(k) + kBoundaryTol) out.derivative(k) = std::max(0.0, out.derivative(k));
    if (s(k) >= hi(k) - kBoundaryTol) out.derivative(k) = std::min(0.0, out.derivative(k));
  }
  return out;
}

Vector Dynamics::channel_lift(const ChannelData& c, const Vector& y_star) const {
  switch (c.kind) {
    case ChannelKind::kIntegrator:
    case ChannelKind::kParallel:
      return y_star;
    case ChannelKind::kFeedback: {
      Eigen::FullPivLU<Matrix> lu(c.A);
      require(lu.isInvertible(), ErrorKind::kInapplicable,
              "feedback compensator A is singular; no lifted equilibrium");
      return -lu.solve(c.B * y_star);
    }
    case ChannelKind::kGeneralized:
      require(c.Pi.has_value(), ErrorKind::kInfeasible,
              "regulator equations have no solution; no lifted equilibrium");
      return *c.Pi * y_star;
  }
  return y_star;
}

Vector Dynamics::lift_equilibrium(const KktPoint& k) const {
  const Game& g = spec_.game;
  const int N = g.num_players();
  const int n = g.total_dim();
  const int m = g.num_rows();
  require(k.x_star.size() == n, ErrorKind::kInvalidInput, "KKT point has the wrong x length");
  require(k.lambda_star.size() == N * m, ErrorKind::kInvalidInput,
          "KKT point has the wrong multiplier length");
  Vector s = Vector::Zero(dim());
  auto put = [&](int seg, const Vector& v) {
    const Segment& sg = layout_.segments()[seg];
    s.segment(sg.offset, sg.length) = v;
  };
  const Vector consensus = k.x_star.replicate(N, 1);
  if (spec_.family == Family::kPartialGeneralizedNocon) {
    const ChannelData& c = channels_[0];
    require(c.Pi.has_value(), ErrorKind::kInfeasible,
            "regulator equations have no solution; no lifted equilibrium");
    put(nocon_theta_, *c.Pi * k.x_star);
    put(nocon_xs_, other_blocks(consensus));
    return s;
  }
  const bool partial = is_partial(spec_.family);
  const ChannelData& xc = channels_[0];
  const Vector y_x = partial ? consensus : k.x_star;
  if (xc.kind == ChannelKind::kGeneralized) {
    put(xc.main_segment, channel_lift(xc, y_x));
  } else {
    put(xc.main_segment, y_x);
    if (xc.comp_segment >= 0) put(xc.comp_segment, xc.kind == ChannelKind::kParallel
                                                       ? Vector(Vector::Zero(xc.state_dim))
                                                       : channel_lift(xc, y_x));
  }
  if (m > 0) {
    const Vector z_star = consensus_auxiliary(g, spec_.graph.laplacian(), k.x_star);
    const Vector targets[2] = {k.lambda_star, z_star};
    for (int ci = 1; ci <= 2; ++ci) {
      const ChannelData& c = channels_[ci];
      const Vector& y = targets[ci - 1];
      if (c.kind == ChannelKind::kGeneralized) {
        put(c.main_segment, channel_lift(c, y));
      } else {
        put(c.main_segment, y);
        if (c.comp_segment >= 0) {
          put(c.comp_segment, c.kind == ChannelKind::kParallel ? Vector(Vector::Zero(c.state_dim))
                                                               : channel_lift(c, y));
        }
      }
    }
  }
  if (spec_.family == Family::kOfcLocalSet) {
    require(admissible(s), ErrorKind::kInvalidInput, "KKT point lies outside the boxes");
  }
  return s;
}

Vector Dynamics::initial_state(const Vector& x0) const {
  const Game& g = spec_.game;
  const int N = g.num_players();
  const int n = g.total_dim();
  const bool partial = is_partial(spec_.family);
  Vector y;
  if (partial && x0.size() == N * n) {
    y = x0;
  } else {
    require(x0.size() == n, ErrorKind::kInvalidInput,
            "initial action vector has length " + std::to_string(x0.size()) + ", expected " +
                std::to_string(n) + (partial ? " or " + std::to_string(N * n) : ""));
    y = partial ? assemble_estimate(x0, Vector::Zero((N - 1) * n)) : x0;
  }
  Vector s = Vector::Zero(dim());
  auto put = [&](int seg, const Vector& v) {
    const Segment& sg = layout_.segments()[seg];
    s.segment(sg.offset, sg.length) = v;
  };
  auto theta_for = [&](const ChannelData& c, const Vector& target) -> Vector {
    if (c.Pi) return *c.Pi * target;
    return c.C.completeOrthogonalDecomposition().solve(target);
  };
  if (spec_.family == Family::kPartialGeneralizedNocon) {
    put(nocon_theta_, theta_for(channels_[0], own_blocks(y)));
    put(nocon_xs_, other_blocks(y));
    return s;
  }
  const ChannelData& xc = channels_[0];
  put(xc.main_segment, xc.kind == ChannelKind::kGeneralized ? theta_for(xc, y) : y);
  return s;
}

double Dynamics::storage(const Vector& s, const Vector& reference) const {
  require(s.size() == dim() && reference.size() == dim(), ErrorKind::kInvalidInput,
          "storage: state has the wrong length");
  double total = 0.0;
  for (const auto& [seg, W] : weights_) {
    const Segment& sg = layout_.segments()[seg];
    if (sg.length == 0) continue;
    require(W.size() > 0, ErrorKind::kInapplicable,
            "segment '" + sg.name + "' has no storage certificate");
    const Vector d = s.segment(sg.offset, sg.length) - reference.segment(sg.offset, sg.length);
    total += 0.5 * d.dot(W * d);
  }
  return total;
}

double Dynamics::max_storage_weight() const {
  double out = 1.0;
  for (const auto& [seg, W] : weights_) {
    if (W.size() == 0) continue;
    out = std::max(out, max_sym_eig(W));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void require_family(const Dynamics& d, std::initializer_list<Family> allowed, const char* op) {
  for (Family f : allowed) {
    if (d.family() == f) return;
  }
  throw Error(ErrorKind::kUnsupportedFamily,
              std::string(op) + " does not apply to family " + to_string(d.family()));
}

}  // namespace

Vector gp_field(const Dynamics& d, const Vector& s) {
  require_family(d, {Family::kGp}, "gp_field");
  return d.field(s);
}

Vector pfc_field(const Dynamics& d, const Vector& s) {
  require_family(d, {Family::kPfc, Family::kPartialPfc}, "pfc_field");
  return d.field(s);
}

Vector ofc_field(const Dynamics& d, const Vector& s) {
  require_family(d, {Family::kOfc, Family::kPartialOfc}, "ofc_field");
  return d.field(s);
}

Vector generalized_field(const Dynamics& d, const Vector& s) {
  require_family(d, {Family::kGeneralized}, "generalized_field");
  return d.field(s);
}

Vector partial_gp_field(const Dynamics& d, const Vector& s) {
  require_family(d, {Family::kPartialGp}, "partial_gp_field");
  return d.field(s);
}

Vector partial_generalized_nocon_field(const Dynamics& d, const Vector& s) {
  require_family(d, {Family::kPartialGeneralizedNocon}, "partial_generalized_nocon_field");
  return d.field(s);
}

Vector ofc_local_set_field(const Dynamics& d, const Vector& s) {
  require_family(d, {Family::kOfcLocalSet}, "ofc_local_set_field");
  return d.field(s);
}

}  // namespace pgne
