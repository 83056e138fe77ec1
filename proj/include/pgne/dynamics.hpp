#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "pgne/common.hpp"
#include "pgne/compensators.hpp"
#include "pgne/game.hpp"
#include "pgne/graph.hpp"

namespace pgne {

enum class Family {
  kGp,
  kPfc,
  kOfc,
  kGeneralized,
  kPartialGp,
  kPartialPfc,
  kPartialOfc,
  kPartialGeneralizedNocon,
  kOfcLocalSet,
};

const char* to_string(Family f);
Family family_from_string(const std::string& name);
bool is_partial(Family f);

struct Segment {
  std::string name;
  int offset = 0;
  int length = 0;
};

/// Named, disjoint segments of the flat state with per-component bounds.
/// A component is projected when at least one of its bounds is finite.
class StateLayout {
 public:
  int add(std::string name, int length);
  void set_bounds(const std::string& name, const Vector& lower, const Vector& upper);
  void set_nonnegative(const std::string& name);

  int dim() const { return dim_; }
  const std::vector<Segment>& segments() const { return segments_; }
  bool has(const std::string& name) const;
  const Segment& segment(const std::string& name) const;
  Vector view(const Vector& s, const std::string& name) const;

  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  bool projected(int k) const;
  std::vector<bool> projected_mask() const;
  /// "segment[index]" for every component, in order.
  std::vector<std::string> component_names() const;

 private:
  std::vector<Segment> segments_;
  Vector lower_;
  Vector upper_;
  int dim_ = 0;
};

/// Per-agent compensator blocks for the x, lambda and z channels. An empty
/// list keeps the plain (projected) integrator on that channel; a single block
/// is shared by every agent.
struct CompensatorSet {
  std::vector<LtiBlock> x;
  std::vector<LtiBlock> lambda;
  std::vector<LtiBlock> z;
};

struct Boxes {
  Vector lower;
  Vector upper;
};

struct DynamicsSpec {
  Family family = Family::kGp;
  Game game;
  GraphTopology graph;
  CompensatorSet compensators;
  std::optional<Boxes> boxes;  // required by kOfcLocalSet
};

/// Output signals carried by a flat state.
struct Outputs {
  Vector x;       // actual actions, length n
  Vector lambda;  // length N m
  Vector z;       // length N m
  Vector x_est;   // partial-decision families: length N n; empty otherwise
};

struct FieldEval {
  Vector derivative;
  /// Argument of the differentiated projection for projected components;
  /// equals the derivative elsewhere.
  Vector pre_projection;
};

enum class ChannelKind { kIntegrator, kParallel, kFeedback, kGeneralized };

/// Internal description of one channel (x, lambda or z) of a dynamics.
struct ChannelData {
  ChannelKind kind = ChannelKind::kIntegrator;
  char role = 'x';  // 'x', 'l' or 'z'
  bool projected = false;
  int io_dim = 0;
  int state_dim = 0;
  int main_segment = -1;  // integrator state, rho or theta
  int comp_segment = -1;  // tau (parallel) or xi (feedback)
  Matrix A, B, C, D;      // block diagonal over agents
  Eigen::SparseMatrix<double> sA, sB, sC, sD;  // sparse copies for evaluation
  bool has_feedthrough = false;
  std::optional<Matrix> P;
  std::optional<Matrix> Pi;  // regulator solution (generalized channels)
};

struct GateReport {
  bool ok = true;
  std::vector<std::string> failures;
};

/// Checks the family's requirements on its compensator blocks.
GateReport verify_family_requirements(const DynamicsSpec& spec);

class Dynamics {
 public:
  /// Throws kInvalidParameter naming the failed check when the gate fails.
  explicit Dynamics(DynamicsSpec spec);
  /// Skips the gate. Only meant for fixtures that must misbehave.
  static Dynamics unchecked(DynamicsSpec spec);

  const DynamicsSpec& spec() const { return spec_; }
  const Game& game() const { return spec_.game; }
  const GraphTopology& graph() const { return spec_.graph; }
  Family family() const { return spec_.family; }
  const StateLayout& layout() const { return layout_; }
  int dim() const { return layout_.dim(); }

  FieldEval evaluate(const Vector& s) const;
  Vector field(const Vector& s) const { return evaluate(s).derivative; }
  Outputs outputs(const Vector& s) const;

  /// Family-specific equilibrium state built from a KKT point. z* is
  /// recomputed on this dynamics' own graph.
  Vector lift_equilibrium(const KktPoint& k) const;
  /// State whose x output is x0 (length n, or N n for partial families) with
  /// zero multipliers, auxiliaries and compensator states.
  Vector initial_state(const Vector& x0) const;

  /// Composite storage 1/2 sum (s - ref)^T W (s - ref) with W = I on
  /// integrator and projected segments and the block certificates elsewhere.
  double storage(const Vector& s, const Vector& reference) const;
  /// Largest eigenvalue over all storage weights.
  double max_storage_weight() const;

  bool admissible(const Vector& s) const;

  // Partial-decision selectors.
  Vector own_blocks(const Vector& x_est) const;                  // R x
  Vector embed_own(const Vector& v) const;                      // R^T v
  Vector other_blocks(const Vector& x_est) const;               // S x
  Vector assemble_estimate(const Vector& own, const Vector& others) const;

 private:
  struct Unchecked {};
  Dynamics(DynamicsSpec spec, Unchecked);
  void build();

  Vector channel_output(const ChannelData& c, const Vector& s, const Vector* v) const;
  void channel_pre(const ChannelData& c, const Vector& s, const Vector& v, const Vector& y,
                   Vector& pre) const;
  Vector channel_lift(const ChannelData& c, const Vector& y_star) const;
  Vector x_input(const Vector& x_out, const Vector& x_actual, const Vector& lambda) const;

  DynamicsSpec spec_;
  StateLayout layout_;
  std::vector<ChannelData> channels_;  // x, lambda, z (absent channels skipped)
  int nocon_theta_ = -1;
  int nocon_xs_ = -1;
  std::vector<std::pair<int, Matrix>> weights_;  // segment index -> weight
};

// Family-checked entry points.
Vector gp_field(const Dynamics& d, const Vector& s);
Vector pfc_field(const Dynamics& d, const Vector& s);
Vector ofc_field(const Dynamics& d, const Vector& s);
Vector generalized_field(const Dynamics& d, const Vector& s);
Vector partial_gp_field(const Dynamics& d, const Vector& s);
Vector partial_generalized_nocon_field(const Dynamics& d, const Vector& s);
Vector ofc_local_set_field(const Dynamics& d, const Vector& s);

}  // namespace pgne
