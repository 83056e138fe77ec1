#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "pgne/benchmarks.hpp"
#include "pgne/experiment.hpp"

namespace {

using nlohmann::json;
using namespace pgne;

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kInvalidInput, "cannot read " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kInvalidInput, path + ": " + e.what());
  }
  return j;
}

void apply_overrides(json& j, const std::optional<std::uint64_t>& seed,
                     const std::optional<double>& h, const std::optional<double>& horizon) {
  if (seed) {
    j["seed"] = *seed;
    if (j.contains("game") && j["game"].is_object() && j["game"].contains("seed")) {
      j["game"]["seed"] = *seed;
    }
  }
  if (h) j["integrator"]["h"] = *h;
  if (horizon) j["integrator"]["horizon"] = *horizon;
}

int cmd_run(const std::string& file, const std::optional<std::uint64_t>& seed,
            const std::optional<double>& h, const std::optional<double>& horizon) {
  json j = read_json(file);
  apply_overrides(j, seed, h, horizon);
  const ExperimentConfig cfg = parse_experiment(j);
  const ExperimentResult r = run_experiment(cfg);
  const std::filesystem::path dir = cfg.output_dir ? *cfg.output_dir : output_root() / cfg.name;
  std::cout << cfg.name << ": exit " << r.exit_code;
  if (r.reason) std::cout << " (" << to_string(*r.reason) << ")";
  if (r.residual) std::cout << ", residual " << r.residual->total;
  if (r.relative_error) std::cout << ", relative error " << *r.relative_error;
  if (r.dissipation) std::cout << ", dissipation " << (r.dissipation->passes ? "ok" : "VIOLATED");
  std::cout << "\n  artifacts: " << dir.string() << "\n";
  if (!r.message.empty()) std::cerr << r.message << "\n";
  return r.exit_code;
}

int cmd_bench(const std::string& matrix, int threads) {
  const auto outcomes = run_bench(matrix, output_root(), threads);
  bool ok = true;
  for (const BenchOutcome& o : outcomes) {
    const bool match = o.exit_code == o.expected_exit;
    ok &= match;
    std::cout << (match ? "[ ok ] " : "[FAIL] ") << o.name << ": exit " << o.exit_code
              << " (expected " << o.expected_exit << ", " << o.wall_seconds << " s)";
    if (!o.message.empty()) std::cout << " " << o.message;
    std::cout << "\n";
  }
  std::cout << "summary: " << (output_root() / matrix / "bench_summary.json").string() << "\n";
  return ok ? 0 : 1;
}

int cmd_verify(const std::string& file) {
  const json j = read_json(file);
  const json spec = j.contains("block") ? j.at("block") : j;
  const int dim = j.value("dim", spec.value("dim", 1));
  const std::string channel = j.value("channel", std::string("x"));
  const LtiBlock block = block_from_json(spec, dim, channel == "lambda");
  json report = compensator_report(block);
  int code = 0;
  if (j.contains("family")) {
    DynamicsSpec ds{family_from_string(j.at("family").get<std::string>()),
                    make_zero_sum_example(), GraphTopology::complete(2), {}, {}};
    if (channel == "lambda") ds.compensators.lambda = {block};
    else if (channel == "z") ds.compensators.z = {block};
    else ds.compensators.x = {block};
    const GateReport gate = verify_family_requirements(ds);
    report["gate"] = {{"family", j.at("family")}, {"channel", channel}, {"ok", gate.ok},
                      {"failures", gate.failures}};
    if (!gate.ok) code = kExitGate;
  }
  std::cout << report.dump(2) << "\n";
  return code;
}

int cmd_oracle(const std::string& file, const std::optional<std::uint64_t>& seed) {
  json j = read_json(file);
  const json game_j = j.contains("game") ? j.at("game") : j;
  std::uint64_t s = j.value("seed", std::uint64_t{42});
  json gj = game_j;
  if (seed) {
    s = *seed;
    gj["seed"] = *seed;
  }
  const Game game = game_from_json(gj, s);
  const KktPoint k = solve_gne_oracle(game);
  const MonotonicityReport mono = monotonicity_report(game, 200, s);
  json out = {{"game", game.name()},
              {"players", game.num_players()},
              {"n", game.total_dim()},
              {"m", game.num_rows()},
              {"monotonicity", {{"class", to_string(mono.cls)},
                                {"mu", mono.mu},
                                {"theta", mono.theta},
                                {"exact", mono.exact}}},
              {"x_star", std::vector<double>(k.x_star.data(), k.x_star.data() + k.x_star.size())},
              {"lambda_common", std::vector<double>(k.lambda_common.data(),
                                                    k.lambda_common.data() + k.lambda_common.size())},
              {"active_set", k.active_set},
              {"non_unique", k.non_unique}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Passivity-based GNE seeking dynamics: experiments and benchmarks"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed;
  std::optional<double> h, horizon;

  std::string config;
  auto* run = app.add_subcommand("run", "Run one experiment config");
  run->set_help_flag("--help", "Print this help message and exit");
  run->add_option("config", config, "Experiment JSON file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Override the seed");
  run->add_option("--h", h, "Override the step size");
  run->add_option("--horizon", horizon, "Override the horizon");

  std::string matrix;
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  auto* bench = app.add_subcommand("bench", "Run a named experiment matrix (full, quick)");
  bench->add_option("matrix", matrix, "Matrix name")->required();
  bench->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  std::string block_file;
  auto* verify = app.add_subcommand("verify-compensator", "Report passivity checks for a block");
  verify->add_option("block", block_file, "Block JSON file")->required()->check(CLI::ExistingFile);

  std::string game_file;
  auto* oracle = app.add_subcommand("oracle", "Solve a quadratic game with the active-set oracle");
  oracle->add_option("game", game_file, "Game or experiment JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  oracle->add_option("--seed", seed, "Override the seed");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config, seed, h, horizon);
    if (*bench) return cmd_bench(matrix, threads);
    if (*verify) return cmd_verify(block_file);
    if (*oracle) return cmd_oracle(game_file, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
