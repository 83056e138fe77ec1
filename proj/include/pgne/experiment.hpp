#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pgne/diagnostics.hpp"
#include "pgne/dynamics.hpp"
#include "pgne/integrator.hpp"

namespace pgne {

inline constexpr const char* kExperimentSchema = "pgne.experiment/1";

/// Exit codes shared by the CLI and the bench runner.
enum ExitCode : int {
  kExitResidual = 0,
  kExitConfig = 1,
  kExitHorizon = 2,
  kExitDivergence = 3,
  kExitGate = 4,
};

/// Parsed experiment description. `raw` keeps the normalized JSON so the
/// summary can echo it.
struct ExperimentConfig {
  nlohmann::json raw;
  std::string name;
  std::uint64_t seed = 42;
  Family family = Family::kGp;
  IntegratorConfig integrator;
  std::vector<std::string> probes;
  std::optional<std::filesystem::path> output_dir;
};

/// Validates the schema field and required members; fills defaults.
ExperimentConfig parse_experiment(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::filesystem::path& file);

/// Game described by a "game" object: zero_sum, cournot, sensor, box_example
/// or an inline quadratic definition.
Game game_from_json(const nlohmann::json& j, std::uint64_t default_seed);

/// Matrix from nested row-major arrays; vector from a flat array.
Matrix matrix_from_json(const nlohmann::json& j);
Vector vector_from_json(const nlohmann::json& j);

/// Blocks for one channel. `j` is null (integrator), one block description
/// shared by every agent, or an array with one description per agent.
/// `io_dims` gives the per-agent io dimension. "integrator" maps to the empty
/// list, which every family reads as the plain integrator.
std::vector<LtiBlock> channel_blocks_from_json(const nlohmann::json& j,
                                               const std::vector<int>& io_dims, bool lambda);

/// Single block from a description with an explicit io dimension.
LtiBlock block_from_json(const nlohmann::json& j, int dim, bool lambda);

struct BuiltExperiment {
  Dynamics dynamics;
  std::optional<KktPoint> oracle;
  Vector initial_state;
  IntegratorConfig integrator;
  std::vector<std::string> notes;
};

/// Builds the dynamics (gate included), the oracle reference when the game
/// has a quadratic form, and the initial state. The step guard is applied.
BuiltExperiment build_experiment(const ExperimentConfig& cfg);

struct ExperimentResult {
  int exit_code = kExitConfig;
  std::string message;
  std::optional<TerminalReason> reason;
  std::optional<ResidualBreakdown> residual;
  std::optional<DissipationReport> dissipation;
  std::optional<double> relative_error;  // |x(T) - x*| / max(1, |x*|)
  nlohmann::json summary;
  double wall_seconds = 0.0;
};

/// Integrates and writes trajectory.csv, summary.json and plot.py into the
/// output directory. Gate failures produce exit code 4 and a summary naming
/// the failed checks; integration never starts in that case.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Equilibrium estimate built from a state when no oracle exists: x from the
/// outputs, the multiplier average (clipped at zero) as common multiplier and
/// z* recomputed on the graph.
KktPoint kkt_from_state(const Dynamics& dyn, const Vector& s);

struct BenchEntry {
  nlohmann::json config;
  int expected_exit = kExitResidual;
};

/// Named experiment matrices: "full" (long horizons, stop rules) and "quick"
/// (the same tuples over short horizons).
std::vector<BenchEntry> bench_matrix(const std::string& name);

struct BenchOutcome {
  std::string name;
  int exit_code = kExitConfig;
  int expected_exit = kExitResidual;
  double wall_seconds = 0.0;
  std::string message;
};

/// Runs every entry of a matrix on `threads` workers, writing each experiment
/// into root/<matrix>/<name>.
std::vector<BenchOutcome> run_bench(const std::string& matrix,
                                    const std::filesystem::path& root, int threads);

/// Output root from PGNE_OUTPUT_ROOT, defaulting to ./pgne_out.
std::filesystem::path output_root();

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

/// Compensator verification report for verify-compensator.
nlohmann::json compensator_report(const LtiBlock& block);

}  // namespace pgne
