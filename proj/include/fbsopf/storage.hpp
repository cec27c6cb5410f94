#pragma once

#include "fbsopf/opf.hpp"

namespace fbsopf {

struct Horizon {
  Index steps = 1;
  double step_hours = 1.0;

  double hours() const { return steps * step_hours; }
  double days() const { return hours() / 24.0; }
};

struct StorageSpec {
  Index bus = 0;
  double p_rated = 0.0;  // pu, caps both charge and discharge power
  double eta_ch = 1.0;
  double eta_dis = 1.0;
  double e0 = 0.0;     // pu*h
  double e_min = 0.0;  // pu*h
  double e_max = 0.0;  // pu*h, ignored in sizing mode
  bool sizing = false;
  double capacity_cost = 0.0;  // currency per pu*h of installed capacity
  double calendar_life_years = 10.0;
  std::string name;
};

/// Discrete energy dynamics e(k+1) = e(k) + B u(k) with u = [p_dis; p_ch]
/// (generation sign convention: p_dis >= 0, p_ch <= 0), stacked over the
/// horizon as E = S_x e0 + S_u U.
struct StorageDynamics {
  Mat B;                            // n_s x 2 n_s
  Eigen::SparseMatrix<double> S_x;  // (N n_s) x n_s
  Eigen::SparseMatrix<double> S_u;  // (N n_s) x (2 N n_s)
};

StorageDynamics build_storage_dynamics(const std::vector<StorageSpec>& fleet, const Horizon& horizon);

/// E = S_x e0 + S_u U reshaped to n_s x N. U stacks [dis; ch] per period.
Mat reconstruct_energy(const StorageDynamics& dyn, const std::vector<StorageSpec>& fleet, const Vec& u);

/// A multiperiod case: per-period loads, generator caps and prices. Storage
/// units appear in the LP as generator pairs appended after the grid
/// generators (discharge in [0, p_rated], charge in [-p_rated, 0]).
struct MultiperiodCase {
  std::vector<GeneratorSpec> gens;
  std::vector<StorageSpec> fleet;
  OperatingLimits limits;
  Horizon horizon;
  double v_slack = 1.0;
  Mat load_p;     // n x N, pu
  Mat load_q;     // n x N
  Mat gen_p_max;  // n_g x N per-period caps; empty = static spec bounds
  Mat gen_cost;   // n_g x N per-period prices; empty = static spec cost
  bool sizing = false;
  bool terminal_soc = false;  // require e(N) >= e0
  double memory_cap_gb = 6.0;
};

/// Index layout of the multiperiod LP (columns ordered period-major).
struct MultiperiodLayout {
  Index n_gen_total = 0;  // grid generators + 2 per storage
  Index n_grid_gens = 0;
  Index n_storage = 0;
  Index branches = 0;
  Index buses = 0;
  Index steps = 0;
  Index per_period = 0;

  Index pg(Index g, Index k) const { return k * per_period + g; }
  Index qg(Index g, Index k) const { return k * per_period + n_gen_total + g; }
  Index plp(Index b, Index k) const { return k * per_period + 2 * n_gen_total + b; }
  Index plq(Index b, Index k) const { return k * per_period + 2 * n_gen_total + branches + b; }
  Index v(Index bus, Index k) const { return k * per_period + 2 * n_gen_total + 2 * branches + bus - 1; }
  Index e(Index s, Index k) const { return k * per_period + 2 * n_gen_total + 2 * branches + buses - 1 + s; }
  Index z(Index s) const { return steps * per_period + s; }
  Index dis_gen(Index s) const { return n_grid_gens + 2 * s; }
  Index ch_gen(Index s) const { return n_grid_gens + 2 * s + 1; }
  Index num_vars() const { return steps * per_period + (sizing_vars ? n_storage : 0); }
  bool sizing_vars = false;
};

MultiperiodLayout multiperiod_layout(const RadialNetwork& net, const MultiperiodCase& c);

/// Stacks the single-period constraint set for every period, couples them
/// with the storage energy recursion and adds the capacity variables when
/// sizing. The same linear model (one voltage state) is used throughout.
LpProblem assemble_multiperiod(const RadialNetwork& net, const LinearGridModel& model,
                               const MultiperiodCase& c);

struct MultiperiodSolution {
  Mat p_gen;   // n_gen_total x N
  Mat q_gen;
  Mat loss_p;  // l x N
  Mat loss_q;
  Mat v;       // (n-1) x N
  Mat energy;  // n_s x N
  Vec z;       // n_s (sizing runs)
  double objective = 0.0;
  double operational_cost = 0.0;
  double storage_cost = 0.0;
  int iterations = 0;
};

MultiperiodSolution decode_multiperiod(const LpProblem& problem, const LpSolution& sol,
                                       const MultiperiodLayout& layout, const MultiperiodCase& c);

struct SizingResult {
  double cost_point = 0.0;       // c_s before calendar-life scaling
  double effective_cost = 0.0;   // per pu*h over the horizon
  LpStatus status = LpStatus::IterationLimit;
  Vec z;                         // pu*h per storage
  double objective = 0.0;        // J* including the capacity term
  double operational_cost = 0.0;
  double storage_cost = 0.0;
  MultiperiodSolution dispatch;
  double solve_seconds = 0.0;
  int iterations = 0;
};

/// Scales a capacity price from currency/pu*h of calendar life to the
/// simulated horizon: cost * horizon_days / (life_years * 365).
double horizon_scaled_capacity_cost(double cost, const Horizon& horizon, double life_years);

/// One sizing solve per cost point, warm-started along the sweep. Infeasible
/// points are recorded and the sweep continues.
std::vector<SizingResult> solve_sizing(const RadialNetwork& net, const LinearGridModel& model,
                                       const MultiperiodCase& c, const std::vector<double>& cost_points,
                                       const SolverOptions& options = {});

struct Revenue {
  double revenue = 0.0;  // operational-cost difference vs the no-storage baseline
  double profit = 0.0;   // revenue minus the horizon-scaled investment
};

Revenue compute_revenue(const SizingResult& with_storage, double baseline_operational_cost);

struct PlacementEntry {
  Index bus = 0;
  std::string label;
  double capacity = 0.0;  // pu*h
};

/// Per-bus capacity map of a sizing run, sorted by descending capacity.
std::vector<PlacementEntry> placement_profile(const RadialNetwork& net,
                                              const std::vector<StorageSpec>& fleet,
                                              const SizingResult& result);

}  // namespace fbsopf
