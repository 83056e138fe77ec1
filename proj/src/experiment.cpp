#include "pgne/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "pgne/benchmarks.hpp"

namespace pgne {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

/// Raised for compensators that cannot be built or fail the family gate.
class GateError : public Error {
 public:
  GateError(const std::string& what, std::vector<std::string> failures)
      : Error(ErrorKind::kInvalidParameter, what), failures_(std::move(failures)) {}
  const std::vector<std::string>& failures() const { return failures_; }

 private:
  std::vector<std::string> failures_;
};

const std::set<std::string>& known_probes() {
  static const std::set<std::string> probes = {"residual",     "kkt_total",
                                               "distance",     "storage",
                                               "multiplier_consensus", "estimate_consensus"};
  return probes;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v(k));
  return out;
}

json matrix_to_json(const Matrix& M) {
  json out = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    out.push_back(row);
  }
  return out;
}

double number(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  require(j.at(key).is_number(), ErrorKind::kInvalidInput,
          std::string("'") + key + "' must be a number");
  return j.at(key).get<double>();
}

Vector broadcast(const json& j, const char* key, double fallback, int dim) {
  if (!j.contains(key)) return Vector::Constant(dim, fallback);
  const json& v = j.at(key);
  if (v.is_number()) return Vector::Constant(dim, v.get<double>());
  Vector out = vector_from_json(v);
  require(out.size() == dim, ErrorKind::kInvalidInput,
          std::string("'") + key + "' has the wrong length");
  return out;
}

GraphTopology graph_from_json(const json& j, int N) {
  if (j.is_null()) return GraphTopology::complete(N);
  require(j.is_object(), ErrorKind::kInvalidInput, "'graph' must be an object");
  GraphTopology g = GraphTopology::complete(N);
  if (j.contains("edges")) {
    std::vector<Edge> edges;
    for (const json& e : j.at("edges")) {
      require(e.is_array() && (e.size() == 2 || e.size() == 3), ErrorKind::kInvalidInput,
              "edges are [i, j] or [i, j, weight]");
      edges.push_back({e[0].get<int>(), e[1].get<int>(), e.size() == 3 ? e[2].get<double>() : 1.0});
    }
    g = GraphTopology(N, std::move(edges));
  } else {
    g = GraphTopology::generate(j.value("generator", std::string("complete")), N,
                                number(j, "weight", 1.0));
  }
  const double scale = number(j, "weight_scale", 1.0);
  require(scale > 0.0, ErrorKind::kInvalidInput, "'weight_scale' must be positive");
  return scale == 1.0 ? g : g.scaled(scale);
}

std::string write_csv(const fs::path& file, const Trajectory& traj) {
  std::ofstream out(file, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::kInvalidInput,
          "cannot write " + file.string());
  std::string line = "t";
  for (const std::string& c : traj.layout.component_names()) line += "," + c;
  for (const std::string& p : traj.probe_names) line += "," + p;
  out << line << '\n';
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    line = format_double(traj.times[k]);
    const Vector& s = traj.states[k];
    for (Eigen::Index c = 0; c < s.size(); ++c) {
      line += ',';
      line += format_double(s(c));
    }
    for (const auto& series : traj.probe_values) {
      line += ',';
      line += format_double(series[k]);
    }
    out << line << '\n';
  }
  return file.filename().string();
}

void write_plot_script(const fs::path& file, const std::string& name, bool has_distance) {
  std::ofstream out(file, std::ios::binary);
  out << "#!/usr/bin/env python3\n"
         "\"\"\"Plots log relative distance (or the residual probe) against time.\"\"\"\n"
         "import csv\n"
         "import math\n"
         "import pathlib\n"
         "import sys\n"
         "\n"
         "import matplotlib\n"
         "matplotlib.use(\"Agg\")\n"
         "import matplotlib.pyplot as plt\n"
         "\n"
         "here = pathlib.Path(__file__).resolve().parent\n"
         "column = \""
      << (has_distance ? "distance" : "residual")
      << "\"\n"
         "t, y = [], []\n"
         "with open(here / \"trajectory.csv\", newline=\"\") as f:\n"
         "    for row in csv.DictReader(f):\n"
         "        if column not in row:\n"
         "            sys.exit(f\"column {column} not recorded\")\n"
         "        v = float(row[column])\n"
         "        t.append(float(row[\"t\"]))\n"
         "        y.append(math.log10(v) if v > 0 else float(\"nan\"))\n"
         "fig, ax = plt.subplots(figsize=(6, 3.5))\n"
         "ax.plot(t, y, lw=1.2)\n"
         "ax.set_xlabel(\"t\")\n"
         "ax.set_ylabel(\"log10 \" + column)\n"
         "ax.set_title(\""
      << name
      << "\")\n"
         "ax.grid(True, alpha=0.3)\n"
         "fig.tight_layout()\n"
         "fig.savefig(here / \"plot.png\", dpi=150)\n";
}

void write_json(const fs::path& file, const json& j) {
  std::ofstream out(file, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::kInvalidInput, "cannot write " + file.string());
  out << j.dump(2) << '\n';
}

json residual_json(const ResidualBreakdown& r) {
  return {{"stationarity", r.stationarity},
          {"multiplier_consensus", r.multiplier_consensus},
          {"complementarity", r.complementarity},
          {"total", r.total}};
}

int exit_for(TerminalReason r) {
  switch (r) {
    case TerminalReason::kResidual: return kExitResidual;
    case TerminalReason::kHorizon: return kExitHorizon;
    case TerminalReason::kDivergence: return kExitDivergence;
  }
  return kExitHorizon;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

fs::path output_root() {
  const char* env = std::getenv("PGNE_OUTPUT_ROOT");
  return env != nullptr && *env != '\0' ? fs::path(env) : fs::path("pgne_out");
}

Matrix matrix_from_json(const json& j) {
  require(j.is_array(), ErrorKind::kInvalidInput, "matrix must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Matrix(0, 0);
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix M(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    require(j[r].is_array() && static_cast<Eigen::Index>(j[r].size()) == cols,
            ErrorKind::kInvalidInput, "matrix rows must have equal length");
    for (Eigen::Index c = 0; c < cols; ++c) M(r, c) = j[r][c].get<double>();
  }
  return M;
}

Vector vector_from_json(const json& j) {
  require(j.is_array(), ErrorKind::kInvalidInput, "vector must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    require(j[k].is_number(), ErrorKind::kInvalidInput, "vector entries must be numbers");
    v(static_cast<Eigen::Index>(k)) = j[k].get<double>();
  }
  return v;
}

Game game_from_json(const json& j, std::uint64_t default_seed) {
  require(j.is_object() && j.contains("kind"), ErrorKind::kInvalidInput,
          "'game' needs a 'kind'");
  const std::string kind = j.at("kind").get<std::string>();
  const std::uint64_t seed = j.value("seed", default_seed);
  if (kind == "zero_sum") return make_zero_sum_example(number(j, "regularization", 0.0));
  if (kind == "cournot") return make_cournot(seed).game;
  if (kind == "sensor") return make_sensor_network(seed, number(j, "d", 6.0));
  if (kind == "box_example") return make_box_example();
  if (kind == "quadratic") {
    const std::vector<int> dims = j.at("action_dims").get<std::vector<int>>();
    AffineGradient f{matrix_from_json(j.at("M")), vector_from_json(j.at("c"))};
    std::optional<LinearConstraints> lin;
    if (j.contains("A")) {
      LinearConstraints l;
      for (const json& a : j.at("A")) l.A.push_back(matrix_from_json(a));
      for (const json& b : j.at("b")) l.b.push_back(vector_from_json(b));
      require(l.A.size() == dims.size() && l.b.size() == dims.size(), ErrorKind::kInvalidInput,
              "quadratic game needs one A and b per player");
      lin = std::move(l);
    }
    return Game::quadratic(j.value("name", std::string("quadratic")), dims, std::move(f),
                           std::move(lin));
  }
  throw Error(ErrorKind::kInvalidInput, "unknown game kind '" + kind + "'");
}

LtiBlock block_from_json(const json& j, int dim, bool lambda) {
  require(j.is_object() && j.contains("type"), ErrorKind::kInvalidInput,
          "compensator description needs a 'type'");
  const std::string type = j.at("type").get<std::string>();
  if (type == "integrator") {
    return lambda ? projected_integrator_block(dim).inner : integrator_block(dim);
  }
  if (type == "pfc_first_order") return pfc_first_order(number(j, "a", 1.0), dim);
  if (type == "pfc_lambda") {
    return pfc_lambda_block(broadcast(j, "a_bar", 1.0, dim), broadcast(j, "b_bar", 1.0, dim))
        .inner;
  }
  if (type == "heavy_anchor") {
    return ofc_heavy_anchor(number(j, "alpha", 1.0), number(j, "beta", 1.0), dim);
  }
  if (type == "ofc_nd") return ofc_nd(dim);
  if (type == "second_order_agent") return second_order_agent_block(number(j, "b", 1.0), dim);
  if (type == "static_feedthrough") return static_feedthrough(number(j, "d", 1.0), dim);
  if (type == "lti" || type == "projected_lti") {
    std::optional<Matrix> P;
    if (j.contains("P")) P = matrix_from_json(j.at("P"));
    LtiBlock b = make_lti_block(j.value("name", type), matrix_from_json(j.at("A")),
                                matrix_from_json(j.at("B")), matrix_from_json(j.at("C")),
                                matrix_from_json(j.at("D")), std::move(P));
    require(b.io_dim() == dim, ErrorKind::kInvalidInput,
            "block '" + b.name + "' has io dimension " + std::to_string(b.io_dim()) +
                ", channel needs " + std::to_string(dim));
    return type == "projected_lti" ? make_projected_block(std::move(b)).inner : b;
  }
  throw Error(ErrorKind::kInvalidInput, "unknown compensator type '" + type + "'");
}

std::vector<LtiBlock> channel_blocks_from_json(const json& j, const std::vector<int>& io_dims,
                                               bool lambda) {
  if (j.is_null()) return {};
  std::vector<LtiBlock> out;
  if (j.is_object()) {
    if (j.value("type", std::string()) == "integrator") return {};
    for (int d : io_dims) out.push_back(block_from_json(j, d, lambda));
    return out;
  }
  require(j.is_array() && j.size() == io_dims.size(), ErrorKind::kInvalidInput,
          "per-agent compensator list needs one entry per agent");
  bool all_integrators = true;
  for (const json& e : j) all_integrators &= e.value("type", std::string()) == "integrator";
  if (all_integrators) return {};
  for (std::size_t i = 0; i < io_dims.size(); ++i) {
    out.push_back(block_from_json(j[i], io_dims[i], lambda));
  }
  return out;
}

ExperimentConfig parse_experiment(const json& j) {
  require(j.is_object(), ErrorKind::kInvalidInput, "experiment config must be an object");
  require(j.value("schema", std::string()) == kExperimentSchema, ErrorKind::kInvalidInput,
          std::string("config 'schema' must be \"") + kExperimentSchema + "\"");
  ExperimentConfig cfg;
  cfg.raw = j;
  require(j.contains("name") && j.at("name").is_string(), ErrorKind::kInvalidInput,
          "config needs a string 'name'");
  cfg.name = j.at("name").get<std::string>();
  require(!cfg.name.empty() && cfg.name.find('/') == std::string::npos &&
              cfg.name.find("..") == std::string::npos,
          ErrorKind::kInvalidInput, "'name' must be a plain directory name");
  cfg.seed = j.value("seed", std::uint64_t{42});
  cfg.raw["seed"] = cfg.seed;
  require(j.contains("family"), ErrorKind::kInvalidInput, "config needs a 'family'");
  cfg.family = family_from_string(j.at("family").get<std::string>());
  require(j.contains("game"), ErrorKind::kInvalidInput, "config needs a 'game'");

  const json integ = j.value("integrator", json::object());
  cfg.integrator.h = number(integ, "h", 1e-3);
  cfg.integrator.horizon = number(integ, "horizon", 10.0);
  cfg.integrator.scheme = scheme_from_string(integ.value("scheme", std::string("projected-euler")));
  cfg.integrator.record_stride = integ.value("record_stride", 1);
  require(cfg.integrator.h > 0.0 && cfg.integrator.horizon >= cfg.integrator.h,
          ErrorKind::kInvalidInput, "integrator needs h > 0 and horizon >= h");
  require(cfg.integrator.record_stride >= 1, ErrorKind::kInvalidInput,
          "record_stride must be >= 1");
  if (integ.contains("stop_on") && !integ.at("stop_on").is_null()) {
    const json& s = integ.at("stop_on");
    StopRule rule;
    rule.residual_threshold = number(s, "residual_threshold", 1e-6);
    rule.window = s.value("window", 100);
    require(rule.residual_threshold > 0.0 && rule.window >= 1, ErrorKind::kInvalidInput,
            "stop_on needs a positive threshold and window");
    cfg.integrator.stop_on = rule;
  }
  if (j.contains("probes")) {
    for (const json& p : j.at("probes")) {
      const std::string name = p.get<std::string>();
      require(known_probes().count(name) == 1, ErrorKind::kInvalidInput,
              "unknown probe '" + name + "'");
      cfg.probes.push_back(name);
    }
  }
  if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
  return cfg;
}

ExperimentConfig load_experiment(const fs::path& file) {
  std::ifstream in(file);
  require(static_cast<bool>(in), ErrorKind::kInvalidInput, "cannot read " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kInvalidInput, file.string() + ": " + e.what());
  }
  return parse_experiment(j);
}

BuiltExperiment build_experiment(const ExperimentConfig& cfg) {
  const json& raw = cfg.raw;
  Game game = game_from_json(raw.at("game"), cfg.seed);
  const int N = game.num_players();
  const int n = game.total_dim();
  const int m = game.num_rows();
  std::vector<std::string> notes;

  GraphTopology graph = graph_from_json(raw.value("graph", json()), N);
  const json graph_j = raw.value("graph", json::object());
  const bool auto_scale = graph_j.is_object() ? graph_j.value("auto_scale", is_partial(cfg.family))
                                              : is_partial(cfg.family);
  if (auto_scale && N > 1) {
    const MonotonicityReport mono = monotonicity_report(game, 200, cfg.seed);
    const PartialInfoReport rep = check_partial_info_condition(graph, mono.theta, mono.mu);
    if (!rep.holds) {
      require(std::isfinite(rep.suggested_scale), ErrorKind::kInvalidInput,
              "graph is disconnected; no weight scale satisfies the partial-information test");
      graph = graph.scaled(rep.suggested_scale);
      std::ostringstream note;
      note << "graph weights scaled by " << rep.suggested_scale << " so lambda2 exceeds "
           << rep.threshold;
      notes.push_back(note.str());
    }
  }

  DynamicsSpec spec{cfg.family, game, graph, {}, {}};
  const json comps = raw.value("compensators", json::object());
  std::vector<int> x_dims = game.action_dims();
  if (is_partial(cfg.family) && cfg.family != Family::kPartialGeneralizedNocon) x_dims.assign(N, n);
  const std::vector<int> m_dims(N, m);
  try {
    spec.compensators.x = channel_blocks_from_json(comps.value("x", json()), x_dims, false);
    if (m > 0) {
      spec.compensators.lambda =
          channel_blocks_from_json(comps.value("lambda", json()), m_dims, true);
      spec.compensators.z = channel_blocks_from_json(comps.value("z", json()), m_dims, false);
    }
  } catch (const Error& e) {
    throw GateError(std::string("compensator rejected: ") + e.what(), {e.what()});
  }
  if (raw.contains("boxes")) {
    spec.boxes = Boxes{vector_from_json(raw.at("boxes").at("lower")),
                       vector_from_json(raw.at("boxes").at("upper"))};
  } else if (cfg.family == Family::kOfcLocalSet &&
             raw.at("game").value("kind", std::string()) == "box_example") {
    spec.boxes = box_example_bounds();
  }

  const GateReport gate = verify_family_requirements(spec);
  if (!gate.ok) {
    std::string what = "compensator gate failed: ";
    for (std::size_t k = 0; k < gate.failures.size(); ++k) {
      what += (k ? "; " : "") + gate.failures[k];
    }
    throw GateError(what, gate.failures);
  }
  Dynamics dyn(std::move(spec));

  std::optional<KktPoint> oracle;
  if (dyn.spec().boxes) {
    try {
      oracle = solve_box_oracle(game, dyn.spec().boxes->lower, dyn.spec().boxes->upper);
    } catch (const Error& e) {
      notes.push_back(std::string("oracle unavailable: ") + e.what());
    }
  } else if (game.has_quadratic_form()) {
    try {
      oracle = solve_gne_oracle(game, graph.laplacian());
    } catch (const Error& e) {
      notes.push_back(std::string("oracle unavailable: ") + e.what());
    }
  }
  const Vector x0 = raw.contains("x0") ? vector_from_json(raw.at("x0")) : Vector::Zero(n);
  Vector s0 = dyn.initial_state(x0);
  IntegratorConfig integ = cfg.integrator;
  const GuardedStep guard = guarded_step(dyn, integ.h);
  if (guard.h < integ.h) {
    // Keep the recording interval in time units roughly as configured.
    const double ratio = integ.h / guard.h;
    integ.record_stride =
        std::max(1, static_cast<int>(std::lround(integ.record_stride * ratio)));
    integ.h = guard.h;
  }
  notes.insert(notes.end(), guard.notes.begin(), guard.notes.end());
  return {std::move(dyn), std::move(oracle), std::move(s0), integ, std::move(notes)};
}

KktPoint kkt_from_state(const Dynamics& dyn, const Vector& s) {
  const Outputs o = dyn.outputs(s);
  const Game& g = dyn.game();
  const int N = g.num_players();
  const int m = g.num_rows();
  KktPoint k;
  k.x_star = o.x;
  k.lambda_common = Vector::Zero(m);
  for (int i = 0; i < N; ++i) k.lambda_common += o.lambda.segment(i * m, m);
  if (m > 0) k.lambda_common = (k.lambda_common / N).cwiseMax(0.0);
  k.lambda_star = k.lambda_common.replicate(N, 1);
  k.z_star = consensus_auxiliary(g, dyn.graph().laplacian(), o.x);
  k.active_set.assign(m, false);
  for (int r = 0; r < m; ++r) k.active_set[r] = k.lambda_common(r) > 0.0;
  return k;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentResult result;
  const fs::path dir = cfg.output_dir ? *cfg.output_dir : output_root() / cfg.name;
  fs::create_directories(dir);
  json summary = {{"schema", "pgne.summary/1"},
                  {"name", cfg.name},
                  {"seed", cfg.seed},
                  {"family", to_string(cfg.family)},
                  {"config", cfg.raw}};
  auto finish = [&](int code, const std::string& message) {
    result.exit_code = code;
    result.message = message;
    summary["exit_code"] = code;
    if (!message.empty()) summary["message"] = message;
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    summary["timing"] = {{"wall_seconds", result.wall_seconds}};
    result.summary = summary;
    write_json(dir / "summary.json", summary);
    return result;
  };

  std::optional<BuiltExperiment> built;
  try {
    built.emplace(build_experiment(cfg));
  } catch (const GateError& e) {
    summary["gate"] = {{"ok", false}, {"failures", e.failures()}};
    return finish(kExitGate, e.what());
  } catch (const Error& e) {
    return finish(kExitConfig, e.what());
  } catch (const json::exception& e) {
    return finish(kExitConfig, std::string("config: ") + e.what());
  }
  summary["gate"] = {{"ok", true}, {"failures", json::array()}};
  const Dynamics& dyn = built->dynamics;
  const Game& game = dyn.game();

  std::optional<Vector> reference;
  std::optional<Vector> x_star;
  if (built->oracle) {
    x_star = built->oracle->x_star;
    try {
      reference = dyn.lift_equilibrium(*built->oracle);
    } catch (const Error& e) {
      built->notes.push_back(std::string("no lifted reference: ") + e.what());
    }
  }

  std::vector<std::string> probe_names = cfg.probes;
  if (probe_names.empty()) {
    probe_names.push_back("residual");
    if (x_star) probe_names.push_back("distance");
    if (reference) probe_names.push_back("storage");
  }
  std::vector<Probe> probes;
  for (const std::string& p : probe_names) {
    if (p == "residual") {
      probes.push_back({p, [&dyn](double, const Vector& s) { return monitor_residual(dyn, s); }});
    } else if (p == "kkt_total") {
      probes.push_back({p, [&dyn](double, const Vector& s) { return state_residual(dyn, s).total; }});
    } else if (p == "distance") {
      if (!x_star) {
        built->notes.push_back("probe 'distance' skipped: no oracle reference");
        continue;
      }
      const double scale = std::max(1.0, x_star->norm());
      probes.push_back({p, [&dyn, xs = *x_star, scale](double, const Vector& s) {
                          return (dyn.outputs(s).x - xs).norm() / scale;
                        }});
    } else if (p == "storage") {
      if (!reference) {
        built->notes.push_back("probe 'storage' skipped: no lifted reference");
        continue;
      }
      probes.push_back({p, [&dyn, ref = *reference](double, const Vector& s) {
                          return dyn.storage(s, ref);
                        }});
    } else if (p == "multiplier_consensus") {
      probes.push_back({p, [&dyn](double, const Vector& s) {
                          return consensus_errors(dyn, s).multiplier;
                        }});
    } else if (p == "estimate_consensus") {
      probes.push_back({p, [&dyn](double, const Vector& s) {
                          return consensus_errors(dyn, s).estimate.value_or(0.0);
                        }});
    }
  }

  Trajectory traj;
  try {
    traj = integrate(dyn, built->initial_state, built->integrator, probes,
                     make_residual_monitor(dyn));
  } catch (const Error& e) {
    return finish(kExitConfig, e.what());
  }
  result.reason = traj.reason;
  const int code = exit_for(traj.reason);

  const ResidualBreakdown res = state_residual(dyn, traj.final_state);
  result.residual = res;
  const ConsensusErrors cons = consensus_errors(dyn, traj.final_state);
  const Outputs out = dyn.outputs(traj.final_state);

  std::string reference_source = "oracle";
  if (!reference && traj.reason != TerminalReason::kDivergence) {
    try {
      reference = dyn.lift_equilibrium(kkt_from_state(dyn, traj.final_state));
      reference_source = "final_state";
    } catch (const Error& e) {
      built->notes.push_back(std::string("no dissipation reference: ") + e.what());
    }
  }
  json dissipation = nullptr;
  if (reference) {
    try {
      const DissipationReport rep = dissipation_check(dyn, traj, *reference);
      result.dissipation = rep;
      dissipation = {{"passes", rep.passes},
                     {"max_positive_increment", rep.max_positive_increment},
                     {"worst_excess", rep.worst_excess},
                     {"worst_index", rep.worst_index},
                     {"initial_storage", rep.initial_storage},
                     {"final_storage", rep.final_storage},
                     {"reference", reference_source}};
    } catch (const Error& e) {
      built->notes.push_back(std::string("dissipation check unavailable: ") + e.what());
    }
  }

  summary["terminal_reason"] = to_string(traj.reason);
  summary["steps"] = traj.steps;
  summary["h"] = traj.h;
  summary["final_time"] = traj.final_time;
  summary["records"] = traj.times.size();
  summary["residual"] = residual_json(res);
  summary["monitor_residual"] = monitor_residual(dyn, traj.final_state);
  summary["consensus"] = {{"multiplier", cons.multiplier},
                          {"estimate", cons.estimate ? json(*cons.estimate) : json(nullptr)}};
  summary["dissipation"] = dissipation;
  summary["final_x"] = vector_to_json(out.x);
  if (x_star) {
    const double rel = (out.x - *x_star).norm() / std::max(1.0, x_star->norm());
    result.relative_error = rel;
    summary["oracle"] = {{"x_star", vector_to_json(*x_star)},
                         {"lambda_common", vector_to_json(built->oracle->lambda_common)},
                         {"relative_error", rel}};
  } else {
    summary["oracle"] = nullptr;
  }
  summary["graph"] = {{"nodes", game.num_players()},
                      {"laplacian", matrix_to_json(dyn.graph().laplacian())}};
  summary["notes"] = built->notes;
  for (const std::string& note : traj.notes) summary["notes"].push_back(note);
  summary["artifacts"] = {{"trajectory", write_csv(dir / "trajectory.csv", traj)},
                          {"plot_script", "plot.py"}};
  write_plot_script(dir / "plot.py", cfg.name,
                    std::find(probe_names.begin(), probe_names.end(), "distance") !=
                            probe_names.end() &&
                        x_star.has_value());
  return finish(code, "");
}

// ---------------------------------------------------------------------------
// Bench matrices

namespace {

json base_config(const std::string& name, const std::string& family, json game, double h,
                 double horizon, int records, std::optional<double> stop) {
  json integ = {{"h", h},
                {"horizon", horizon},
                {"scheme", "projected-euler"},
                {"record_stride", std::max(1, static_cast<int>(horizon / h / records))}};
  if (stop) integ["stop_on"] = {{"residual_threshold", *stop}, {"window", 100}};
  return {{"schema", kExperimentSchema}, {"name", name},      {"seed", 42},
          {"family", family},            {"game", std::move(game)}, {"integrator", integ}};
}

std::vector<BenchEntry> full_matrix() {
  std::vector<BenchEntry> out;
  const json ex1 = {{"kind", "zero_sum"}};
  const json x0 = {1.0, 0.0};
  auto ex1_entry = [&](const std::string& name, const std::string& family, json x_block,
                       double horizon, std::optional<double> stop, int expected, double h = 1e-3) {
    json c = base_config(name, family, ex1, h, horizon, 2000, stop);
    c["x0"] = x0;
    if (!x_block.is_null()) c["compensators"] = {{"x", x_block}};
    out.push_back({c, expected});
  };
  // Fine step: Euler inflates the lossless rotation by exp(h T / 2).
  ex1_entry("ex1_gp", "gp", nullptr, 20.0, 1e-5, kExitHorizon, 1e-4);
  ex1_entry("ex1_pfc1", "pfc", {{"type", "pfc_first_order"}, {"a", 1.0}}, 100.0, 1e-5,
            kExitResidual);
  ex1_entry("ex1_pfc2", "pfc", {{"type", "pfc_first_order"}, {"a", 4.0}}, 100.0, 1e-5,
            kExitResidual);
  ex1_entry("ex1_ofc1", "ofc", {{"type", "heavy_anchor"}, {"alpha", 1.0}, {"beta", 1.0}}, 100.0,
            1e-5, kExitResidual);
  ex1_entry("ex1_ofc2", "ofc", {{"type", "ofc_nd"}}, 100.0, 1e-5, kExitResidual);

  const json cournot = {{"kind", "cournot"}, {"seed", 42}};
  const json pfc = {{"x", {{"type", "pfc_first_order"}, {"a", 2.0}}},
                    {"lambda", {{"type", "pfc_lambda"}, {"a_bar", 2.0}, {"b_bar", 1.0}}},
                    {"z", {{"type", "pfc_first_order"}, {"a", 2.0}}}};
  const json ha = {{"type", "heavy_anchor"}, {"alpha", 1.0}, {"beta", 1.0}};
  const json ofc = {{"x", ha}, {"lambda", ha}, {"z", ha}};
  auto cournot_entry = [&](const std::string& name, const std::string& family, json comps,
                           double horizon) {
    json c = base_config(name, family, cournot, 1e-3, horizon, 2000, 1e-6);
    if (!comps.is_null()) c["compensators"] = std::move(comps);
    out.push_back({c, kExitResidual});
  };
  cournot_entry("cournot_gp", "gp", nullptr, 600.0);
  cournot_entry("cournot_pfc", "pfc", pfc, 600.0);
  cournot_entry("cournot_ofc", "ofc", ofc, 800.0);
  cournot_entry("cournot_partial_gp", "partial_gp", nullptr, 600.0);
  cournot_entry("cournot_partial_pfc", "partial_pfc", pfc, 600.0);
  cournot_entry("cournot_partial_ofc", "partial_ofc", ofc, 800.0);

  {
    json c = base_config("sensor_generalized", "generalized", {{"kind", "sensor"}, {"seed", 42}},
                         1e-3, 200.0, 2000, 1e-6);
    c["compensators"] = {{"x", {{"type", "second_order_agent"}, {"b", 1.0}}},
                         {"lambda", {{"type", "integrator"}}},
                         {"z", {{"type", "integrator"}}}};
    c["x0"] = json::array();
    for (int k = 0; k < 12; ++k) c["x0"].push_back(k % 2 == 0 ? 1.0 : -1.0);
    out.push_back({c, kExitResidual});
  }
  {
    json c = base_config("ex1_nocon", "partial_generalized_nocon",
                         {{"kind", "zero_sum"}, {"regularization", 0.5}}, 1e-3, 400.0, 2000, 1e-6);
    c["graph"] = {{"generator", "path"}, {"auto_scale", true}};
    c["compensators"] = {{"x", {{"type", "second_order_agent"}, {"b", 1.0}}}};
    c["x0"] = x0;
    out.push_back({c, kExitResidual});
  }
  {
    json c = base_config("box_ofc_local_set", "ofc_local_set", {{"kind", "box_example"}}, 1e-3,
                         100.0, 2000, 1e-8);
    c["compensators"] = {{"x", ha}};
    c["boxes"] = {{"lower", {0.0, 0.0}}, {"upper", {1.0, 1.0}}};
    out.push_back({c, kExitResidual});
  }
  return out;
}

}  // namespace

std::vector<BenchEntry> bench_matrix(const std::string& name) {
  if (name == "full") return full_matrix();
  if (name == "quick") {
    std::vector<BenchEntry> out = full_matrix();
    for (BenchEntry& e : out) {
      json& integ = e.config["integrator"];
      const double horizon = std::min(5.0, integ["horizon"].get<double>());
      integ["horizon"] = horizon;
      integ["record_stride"] = std::max(1, static_cast<int>(horizon / integ["h"].get<double>() / 500));
      integ.erase("stop_on");
      e.expected_exit = kExitHorizon;
    }
    return out;
  }
  throw Error(ErrorKind::kInvalidInput, "unknown bench matrix '" + name + "' (full, quick)");
}

std::vector<BenchOutcome> run_bench(const std::string& matrix, const fs::path& root,
                                    int threads) {
  const std::vector<BenchEntry> entries = bench_matrix(matrix);
  std::vector<BenchOutcome> outcomes(entries.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t k = next++; k < entries.size(); k = next++) {
      BenchOutcome& o = outcomes[k];
      o.name = entries[k].config.at("name").get<std::string>();
      o.expected_exit = entries[k].expected_exit;
      try {
        ExperimentConfig cfg = parse_experiment(entries[k].config);
        cfg.output_dir = root / matrix / cfg.name;
        const ExperimentResult r = run_experiment(cfg);
        o.exit_code = r.exit_code;
        o.wall_seconds = r.wall_seconds;
        o.message = r.message;
      } catch (const std::exception& e) {
        o.exit_code = kExitConfig;
        o.message = e.what();
      }
    }
  };
  const int count = std::max(1, std::min<int>(threads, static_cast<int>(entries.size())));
  std::vector<std::thread> pool;
  for (int t = 0; t < count; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();

  json summary = {{"matrix", matrix}, {"experiments", json::array()}};
  for (const BenchOutcome& o : outcomes) {
    summary["experiments"].push_back({{"name", o.name},
                                      {"exit_code", o.exit_code},
                                      {"expected_exit", o.expected_exit},
                                      {"ok", o.exit_code == o.expected_exit},
                                      {"message", o.message}});
  }
  fs::create_directories(root / matrix);
  write_json(root / matrix / "bench_summary.json", summary);
  return outcomes;
}

json compensator_report(const LtiBlock& block) {
  const auto grid = default_frequency_grid();
  json r = {{"name", block.name},
            {"state_dim", block.state_dim()},
            {"io_dim", block.io_dim()},
            {"hurwitz", check_hurwitz(block)}};
  const PositiveRealReport pr = check_positive_real(block, grid);
  r["positive_real"] = {{"pr", pr.pr},
                        {"spr", pr.spr},
                        {"min_eig_over_grid", pr.min_eig_over_grid},
                        {"skipped_points", pr.skipped_points}};
  const OutputStrictPassivityReport osp = check_output_strict_passivity(block, grid);
  r["output_strict_passivity"] = {{"holds", osp.holds}, {"delta", osp.delta}};
  try {
    r["zero_dc_gain"] = check_zero_dc_gain(block);
  } catch (const Error& e) {
    r["zero_dc_gain"] = std::string("inapplicable: ") + e.what();
  }
  try {
    const Matrix Pi = solve_regulator_equations(block);
    r["regulator"] = {{"solvable", true},
                      {"residual", regulator_residual(block, Pi)},
                      {"Pi", matrix_to_json(Pi)},
                      {"nonnegative", Pi.size() == 0 || Pi.minCoeff() >= 0.0}};
  } catch (const Error& e) {
    r["regulator"] = {{"solvable", false}, {"reason", e.what()}};
  }
  const std::string why = projected_structure_violation(block);
  r["projected_structure"] = why.empty() ? json("ok") : json(why);
  if (block.P) {
    r["storage_certificate_margin"] = storage_certificate_margin(block, 0.0);
  } else {
    r["storage_certificate_margin"] = nullptr;
  }
  return r;
}

}  // namespace pgne
