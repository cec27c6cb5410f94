#pragma once

#include "fbsopf/scenario.hpp"

namespace fbsopf {

struct ConvergenceRow {
  int h = 0;
  double voltage_mae = 0.0;       // LP voltages vs exact projection
  double objective = 0.0;
  double sweep_mae = 0.0;         // last in-loop voltage change
  int violations = 0;             // projected limit violations
};

struct ConvergenceStudy {
  std::vector<ConvergenceRow> rows;
  std::uint64_t scenario_hash = 0;
};

/// Runs the sweep OPF for every iteration count in [h_min, h_max] and
/// compares the LP voltages against the exact power-flow projection.
ConvergenceStudy run_convergence_study(const Scenario& scenario, int h_min = 1, int h_max = 4);

struct SweepRow {
  double cost_point = 0.0;  // currency per kWh at the scenario power base
  LpStatus status = LpStatus::IterationLimit;
  double z_total = 0.0;     // pu*h
  double revenue = 0.0;
  double profit = 0.0;
  double objective = 0.0;
  double operational = 0.0;
  double storage_cost = 0.0;
  double seconds = 0.0;
  int iterations = 0;
  Vec z;                    // per storage
};

struct ViabilityStudy {
  std::string config;
  std::uint64_t scenario_hash = 0;
  std::uint64_t seed = 0;
  double baseline_operational = 0.0;
  std::vector<StorageSpec> fleet;
  std::vector<SweepRow> rows;
  /// Largest cost point with strictly positive profit; NaN when none.
  double break_even_cost = std::numeric_limits<double>::quiet_NaN();
};

/// Baseline (no storage) objective, a sizing sweep over the cost points, the
/// break-even cost, and per-bus capacities for every point. `config` picks a
/// named fleet from the scenario ("": the active fleet).
ViabilityStudy run_viability_study(const Scenario& scenario, const std::string& config,
                                   const std::vector<double>& cost_points,
                                   const SolverOptions& options = {});

struct BenchRow {
  Index steps = 0;
  Index variables = 0;
  Index rows = 0;
  double assemble_seconds = 0.0;
  double solve_seconds = 0.0;
  LpStatus status = LpStatus::IterationLimit;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  double loglog_slope = 0.0;  // total runtime vs horizon length
};

/// Times assembly+solve of the sizing problem truncated to each horizon
/// length and fits a log-log regression slope.
BenchReport benchmark_runtime(const Scenario& scenario, const std::vector<Index>& horizon_lengths,
                              const SolverOptions& options = {});

/// Scenario with all series truncated to the first `steps` periods.
Scenario truncate_scenario(const Scenario& scenario, Index steps);

void write_convergence_csv(const std::filesystem::path& path, const ConvergenceStudy& study);
void write_viability_csv(const std::filesystem::path& path, const ViabilityStudy& study);
void write_bench_csv(const std::filesystem::path& path, const BenchReport& report,
                     std::uint64_t scenario_hash);

/// Run manifest: scenario hash, seed, tool version, free-form entries.
void write_manifest(const std::filesystem::path& path, const Scenario& scenario,
                    const std::map<std::string, std::string>& extra);

}  // namespace fbsopf
