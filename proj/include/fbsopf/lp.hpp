#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/SparseCore>

#include "fbsopf/grid.hpp"

namespace fbsopf {

enum class VarKind : std::uint8_t {
  GenP,           // active generator power, entity = generator index
  GenQ,           // reactive generator power
  LossP,          // active-injection loss share, entity = branch index
  LossQ,          // reactive-injection loss share
  Voltage,        // non-slack bus voltage magnitude, entity = bus index
  StorageEnergy,  // storage energy level, entity = storage index
  Capacity,       // sizing capacity z, entity = storage index (period ignored)
  Generic,        // free-form problems built through the API
};

const char* var_kind_code(VarKind kind);

struct VarInfo {
  VarKind kind = VarKind::Generic;
  Index entity = 0;
  Index period = 0;
};

/// Name registry for LP columns. Each (kind, entity, period) triple is
/// registered exactly once; names are derived, e.g. "pg[3]@0".
class VariableRegistry {
 public:
  Index add(VarKind kind, Index entity, Index period);
  Index find(VarKind kind, Index entity, Index period) const;  // throws if absent
  std::optional<Index> try_find(VarKind kind, Index entity, Index period) const;
  const VarInfo& info(Index var) const { return vars_.at(static_cast<std::size_t>(var)); }
  std::string name(Index var) const;
  Index size() const { return static_cast<Index>(vars_.size()); }
  bool same_shape(const VariableRegistry& other) const;

 private:
  static std::uint64_t key(VarKind kind, Index entity, Index period);
  std::vector<VarInfo> vars_;
  std::unordered_map<std::uint64_t, Index> lookup_;
};

/// Solver-agnostic LP:
///   min c'x  s.t.  A_eq x = b_eq,  A_in x <= b_in,  lower <= x <= upper.
/// Constraints are stored as sparse triplets; +/-infinity bounds are allowed.
struct LpProblem {
  Vec cost;
  std::vector<Eigen::Triplet<double>> eq;
  Vec eq_rhs;
  std::vector<Eigen::Triplet<double>> ineq;
  Vec ineq_rhs;
  Vec lower;
  Vec upper;
  VariableRegistry vars;
  std::vector<std::string> row_labels_eq;    // optional, for diagnostics
  std::vector<std::string> row_labels_ineq;  // optional

  Index num_vars() const { return static_cast<Index>(cost.size()); }
  Index num_eq() const { return static_cast<Index>(eq_rhs.size()); }
  Index num_ineq() const { return static_cast<Index>(ineq_rhs.size()); }

  /// Throws InputError if dimensions, bounds or registry are inconsistent.
  void check_consistency() const;
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

const char* lp_status_name(LpStatus status);

struct LpSolution {
  LpStatus status = LpStatus::IterationLimit;
  double objective = 0.0;
  Vec x;
  Vec y_eq;     // equality row duals
  Vec y_ineq;   // inequality row duals (<= 0 for binding rows)
  Vec z_lower;  // bound duals, >= 0
  Vec z_upper;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;

  double value(const LpProblem& problem, VarKind kind, Index entity, Index period = 0) const;
  double dual_objective(const LpProblem& problem) const;
};

struct SolverOptions {
  double tol_feas = 1e-9;    // relative primal/dual residual target
  double tol_gap = 1e-10;    // relative complementarity gap target
  int max_iter = 200;
  bool verbose = false;
};

/// Interior-point solve. Infeasible/unbounded problems are reported through
/// the status, never as exceptions; malformed problems throw InputError.
LpSolution solve_lp(const LpProblem& problem, const SolverOptions& options = {});

/// Re-solve starting from a previous solution of a problem with the same
/// variable registry shape. The optimum is identical to a cold solve; the
/// start point only buys iterations.
LpSolution warm_start(const LpProblem& problem, const LpSolution& previous,
                      const SolverOptions& options = {});

/// Writes the problem in CPLEX LP text format for external cross-checks.
void write_lp_format(const LpProblem& problem, std::ostream& os);

}  // namespace fbsopf
