#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "pgne/benchmarks.hpp"
#include "pgne/cones.hpp"
#include "pgne/experiment.hpp"

namespace py = pybind11;
using namespace pgne;

namespace {

// JSON crosses the boundary as text; the Python side wraps it with json.
ExperimentConfig config_from_text(const std::string& text) {
  return parse_experiment(nlohmann::json::parse(text));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Passivity-based gradient-play dynamics for generalized Nash equilibrium seeking";

  py::register_exception<Error>(m, "PgneError", PyExc_RuntimeError);

  py::enum_<Family>(m, "Family")
      .value("gp", Family::kGp)
      .value("pfc", Family::kPfc)
      .value("ofc", Family::kOfc)
      .value("generalized", Family::kGeneralized)
      .value("partial_gp", Family::kPartialGp)
      .value("partial_pfc", Family::kPartialPfc)
      .value("partial_ofc", Family::kPartialOfc)
      .value("partial_generalized_nocon", Family::kPartialGeneralizedNocon)
      .value("ofc_local_set", Family::kOfcLocalSet);
  m.def("family_from_string", &family_from_string);

  py::enum_<Scheme>(m, "Scheme")
      .value("projected_euler", Scheme::kProjectedEuler)
      .value("projected_rk4", Scheme::kProjectedRk4);
  py::enum_<TerminalReason>(m, "TerminalReason")
      .value("horizon", TerminalReason::kHorizon)
      .value("residual", TerminalReason::kResidual)
      .value("divergence", TerminalReason::kDivergence);

  // Games
  py::class_<Game>(m, "Game")
      .def_property_readonly("name", &Game::name)
      .def_property_readonly("num_players", &Game::num_players)
      .def_property_readonly("total_dim", &Game::total_dim)
      .def_property_readonly("num_rows", &Game::num_rows)
      .def_property_readonly("action_dims", &Game::action_dims)
      .def("player_gradient", &Game::player_gradient, py::arg("player"), py::arg("x"))
      .def("pseudo_gradient", [](const Game& g, const Vector& x) { return pseudo_gradient(g, x); })
      .def("aggregate_constraint",
           [](const Game& g, const Vector& x) { return aggregate_constraint(g, x); });
  m.def(
      "quadratic_game",
      [](const std::string& name, std::vector<int> dims, const Matrix& M, const Vector& c) {
        return Game::quadratic(name, std::move(dims), {M, c});
      },
      py::arg("name"), py::arg("action_dims"), py::arg("M"), py::arg("c"));
  m.def("zero_sum_example", &make_zero_sum_example, py::arg("regularization") = 0.0);
  m.def("cournot", [](std::uint64_t seed) { return make_cournot(seed).game; }, py::arg("seed") = 42);
  m.def("sensor_network", &make_sensor_network, py::arg("seed") = 42, py::arg("d") = 6.0);
  m.def("box_example", &make_box_example);

  py::class_<KktPoint>(m, "KktPoint")
      .def_readonly("x_star", &KktPoint::x_star)
      .def_readonly("lambda_star", &KktPoint::lambda_star)
      .def_readonly("z_star", &KktPoint::z_star)
      .def_readonly("lambda_common", &KktPoint::lambda_common);
  m.def(
      "solve_gne_oracle",
      [](const Game& g, const std::optional<Matrix>& L) { return solve_gne_oracle(g, L); },
      py::arg("game"), py::arg("laplacian") = std::nullopt);
  m.def("solve_box_oracle", &solve_box_oracle, py::arg("game"), py::arg("lower"), py::arg("upper"));

  // Graphs
  py::class_<GraphTopology>(m, "Graph")
      .def_static("generate", &GraphTopology::generate, py::arg("name"), py::arg("n"),
                  py::arg("weight") = 1.0)
      .def_property_readonly("num_nodes", &GraphTopology::num_nodes)
      .def_property_readonly("laplacian", &GraphTopology::laplacian)
      .def("scaled", &GraphTopology::scaled)
      .def("fiedler", [](const GraphTopology& g) { return connectivity_and_fiedler(g).lambda2; });

  // Compensators
  py::class_<LtiBlock>(m, "LtiBlock")
      .def_readonly("name", &LtiBlock::name)
      .def_readonly("A", &LtiBlock::A)
      .def_readonly("B", &LtiBlock::B)
      .def_readonly("C", &LtiBlock::C)
      .def_readonly("D", &LtiBlock::D)
      .def_readonly("P", &LtiBlock::P)
      .def_property_readonly("io_dim", &LtiBlock::io_dim)
      .def_property_readonly("state_dim", &LtiBlock::state_dim);
  m.def("lti_block", &make_lti_block, py::arg("name"), py::arg("A"), py::arg("B"), py::arg("C"),
        py::arg("D"), py::arg("P") = std::nullopt);
  m.def("pfc_first_order", &pfc_first_order, py::arg("a"), py::arg("dim"));
  m.def("heavy_anchor", &ofc_heavy_anchor, py::arg("alpha"), py::arg("beta"), py::arg("dim"));
  m.def("ofc_nd", &ofc_nd, py::arg("dim"));
  m.def("second_order_agent", &second_order_agent_block, py::arg("b"), py::arg("dim"));
  m.def(
      "verify_compensator",
      [](const LtiBlock& b) { return compensator_report(b).dump(); },
      "JSON text with the positive-real, passivity, DC-gain and regulator checks");

  // Dynamics
  py::class_<Boxes>(m, "Boxes")
      .def(py::init([](Vector lo, Vector hi) { return Boxes{std::move(lo), std::move(hi)}; }),
           py::arg("lower"), py::arg("upper"));
  py::class_<CompensatorSet>(m, "Compensators")
      .def(py::init([](std::vector<LtiBlock> x, std::vector<LtiBlock> l, std::vector<LtiBlock> z) {
             return CompensatorSet{std::move(x), std::move(l), std::move(z)};
           }),
           py::arg("x") = std::vector<LtiBlock>{}, py::arg("lam") = std::vector<LtiBlock>{},
           py::arg("z") = std::vector<LtiBlock>{});
  py::class_<Dynamics>(m, "Dynamics")
      .def(py::init([](Family f, const Game& g, const GraphTopology& graph, const CompensatorSet& c,
                       const std::optional<Boxes>& boxes) {
             return Dynamics({f, g, graph, c, boxes});
           }),
           py::arg("family"), py::arg("game"), py::arg("graph"),
           py::arg("compensators") = CompensatorSet{}, py::arg("boxes") = std::nullopt)
      .def_property_readonly("dim", &Dynamics::dim)
      .def_property_readonly("family", &Dynamics::family)
      .def("segments",
           [](const Dynamics& d) {
             std::vector<std::tuple<std::string, int, int>> out;
             for (const Segment& s : d.layout().segments()) out.emplace_back(s.name, s.offset, s.length);
             return out;
           })
      .def("field", &Dynamics::field)
      .def("actions", [](const Dynamics& d, const Vector& s) { return d.outputs(s).x; })
      .def("initial_state", &Dynamics::initial_state)
      .def("lift_equilibrium", &Dynamics::lift_equilibrium)
      .def("storage", &Dynamics::storage)
      .def("admissible", &Dynamics::admissible)
      .def("residual", [](const Dynamics& d, const Vector& s) { return state_residual(d, s).total; });

  py::class_<Trajectory>(m, "Trajectory")
      .def_readonly("times", &Trajectory::times)
      .def_readonly("states", &Trajectory::states)
      .def_readonly("final_state", &Trajectory::final_state)
      .def_readonly("final_time", &Trajectory::final_time)
      .def_readonly("steps", &Trajectory::steps)
      .def_readonly("reason", &Trajectory::reason);
  m.def(
      "integrate",
      [](const Dynamics& d, const Vector& s0, double h, double horizon, Scheme scheme, int stride,
         std::optional<double> stop) {
        IntegratorConfig c;
        c.h = h;
        c.horizon = horizon;
        c.scheme = scheme;
        c.record_stride = stride;
        if (stop) c.stop_on = StopRule{*stop, 100};
        const py::gil_scoped_release release;
        return integrate(d, s0, c, {}, stop ? make_residual_monitor(d) : ResidualFn{});
      },
      py::arg("dynamics"), py::arg("s0"), py::arg("h") = 1e-3, py::arg("horizon") = 10.0,
      py::arg("scheme") = Scheme::kProjectedEuler, py::arg("record_stride") = 1,
      py::arg("stop_residual") = std::nullopt);

  // Cones
  m.def("differentiated_projection", &differentiated_projection, py::arg("x"), py::arg("v"));
  m.def("complementarity_residual", &complementarity_residual, py::arg("lam"), py::arg("w"));

  // Experiments
  m.def(
      "run_experiment",
      [](const std::string& text, const std::optional<std::filesystem::path>& out) {
        ExperimentConfig cfg = config_from_text(text);
        if (out) cfg.output_dir = *out;
        ExperimentResult r;
        {
          const py::gil_scoped_release release;
          r = run_experiment(cfg);
        }
        return py::make_tuple(r.exit_code, r.summary.dump());
      },
      py::arg("config_json"), py::arg("output_dir") = std::nullopt,
      "Runs an experiment; returns (exit_code, summary JSON text)");
  m.def(
      "bench_matrix",
      [](const std::string& name) {
        std::vector<std::pair<std::string, int>> out;
        for (const BenchEntry& e : bench_matrix(name)) out.emplace_back(e.config.dump(), e.expected_exit);
        return out;
      },
      py::arg("name") = "full", "List of (config JSON text, expected exit code)");
}
