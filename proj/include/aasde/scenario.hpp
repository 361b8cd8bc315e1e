#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "aasde/aa_test.hpp"
#include "aasde/integrator.hpp"

namespace aasde {

inline constexpr int kSchemaVersion = 1;

enum class Task { simulate, fixed_point, stability, aa_test, check_conditions };

/// Parses "simulate", "fixed_point"/"fixed-point", ...; throws ConfigError.
Task parse_task(std::string_view name);
std::string_view task_name(Task task);

/// Exit status taxonomy shared by the CLI and the C API.
enum ExitCode : int {
  kExitPass = 0,
  kExitHypothesisViolation = 1,
  kExitNumericalFailure = 2,
  kExitConfigError = 3,
};

struct DeclaredConstants {
  std::optional<double> K;
  std::optional<double> omega;
  std::optional<double> L;
  std::optional<double> L_prime;
  std::optional<double> L_hat;
};

struct GridConfig {
  double t_min = 0.0;
  double t_max = 1.0;
  double step = 1.0 / 64.0;
  double burn_in_span = 0.0;

  TimeGrid window() const { return TimeGrid::covering(t_min, t_max, step); }
};

struct Tolerances {
  double picard_tol = 1e-2;
  std::size_t max_iter = 50;
  std::optional<double> ratio_slack;
  double envelope_slack = 1.10;
  double rate_slack = 0.85;
  double se_band = 3.0;
  std::optional<double> aa_threshold;
  double moment_cap = 1e4;
  std::size_t lipschitz_samples = 4096;
  double lipschitz_radius = 10.0;
  std::size_t dissipation_check_points = 400;
};

struct AAConfig {
  enum class Source { signal, solution, composition };

  Source source = Source::signal;
  ForcingSpec signal;                       // source == signal
  std::vector<double> frequencies;          // empty: taken from the process
  std::size_t depth = 7;
  std::vector<double> shifts;               // user-supplied alternative to depth
  std::optional<LimitCandidate> candidate;
  std::vector<double> test_nodes;
  ForcingSpec::Role composition_field = ForcingSpec::Role::drift_f;
};

struct OutputConfig {
  bool trajectories = true;
  std::size_t trajectory_paths = 16;
  bool dump_paths = false;
  bool plot = false;
};

/// A fully parsed and validated scenario file.
struct Scenario {
  int schema_version = kSchemaVersion;
  std::string name;
  std::optional<Task> task;
  Equation equation;
  DeclaredConstants constants;
  GridConfig grid;
  std::size_t n_paths = 1000;
  std::uint64_t master_seed = 0;
  std::optional<StateVector> x0;
  std::optional<StateVector> y0;
  double initial_constant = 0.0;
  Tolerances tolerances;
  std::optional<AAConfig> aa;
  OutputConfig output;
  std::string output_dir = "out";
};

/// Strict parse: unknown keys, wrong types and inconsistent dimensions are
/// ConfigError; invalid operators surface as ConfigError too.
Scenario parse_scenario(const nlohmann::json& config);
Scenario load_scenario(const std::filesystem::path& path);

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;
  unsigned workers = 1;
  bool force = false;
  std::optional<std::uint64_t> seed;
  std::optional<Task> task;
  bool plot = false;
};

struct RunOutcome {
  int exit_code = kExitPass;
  /// Report written for the task, or the diagnostic on failure.
  nlohmann::ordered_json report;
  std::vector<std::filesystem::path> artifacts;
};

/// Audits the declared constants, runs the task and writes its artifacts.
/// Task and audit failures are mapped to exit codes and a diagnostic.json;
/// only I/O failures on the output directory escape as exceptions.
RunOutcome run_scenario(const Scenario& scenario, const RunOptions& options);

/// eta, k, margin and the verdicts for both hypotheses (no simulation).
nlohmann::ordered_json check_conditions(const Scenario& scenario);

}  // namespace aasde
