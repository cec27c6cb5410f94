#pragma once

#include "fbsopf/linearizer.hpp"
#include "fbsopf/lp.hpp"
#include "fbsopf/powerflow.hpp"

namespace fbsopf {

class OpfError : public std::runtime_error {
 public:
  explicit OpfError(const std::string& what, LpStatus status = LpStatus::IterationLimit)
      : std::runtime_error(what), status_(status) {}
  LpStatus status() const { return status_; }

 private:
  LpStatus status_;
};

struct GeneratorSpec {
  Index bus = 0;
  double p_min = 0.0;  // pu
  double p_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
  double cost = 0.0;  // currency per pu*h; must be >= 0
  std::string name;
};

struct OperatingLimits {
  Vec v_min;    // per bus, slack entry unused
  Vec v_max;
  Vec i_b_max;  // per branch

  static OperatingLimits from_network(const RadialNetwork& net, double v_min, double v_max);
};

/// Generator-to-bus incidence (n x n_g, one unit entry per column).
Mat generator_map(const RadialNetwork& net, const std::vector<GeneratorSpec>& gens);

/// Problem constraints in assembly order:
///   eq: power balance (1 row), then voltage couplings (n-1 rows)
///   ineq: 4l active-loss planes, 4l reactive-loss planes, 2l branch limits
LpProblem assemble_single_period(const RadialNetwork& net, const LinearGridModel& model,
                                 const std::vector<GeneratorSpec>& gens,
                                 const OperatingLimits& limits, const Vec& p_d, const Vec& q_d,
                                 double v_slack);

struct DispatchSolution {
  Vec p_gen;   // per generator
  Vec q_gen;
  Vec loss_p;  // per branch
  Vec loss_q;
  Vec v;       // per non-slack bus (LP voltage estimates)
  double objective = 0.0;
  int iterations = 0;          // sweep iterations h actually used
  double final_voltage_mae = 0.0;
  Vec voltage_state;           // |v| the final LP was built from
};

DispatchSolution decode_dispatch(const LpProblem& problem, const LpSolution& sol,
                                 Index n_gens, Index n_branches, Index n_buses);

/// Iterative sweep OPF: solve the LP, push the dispatch through one
/// forward/backward voltage update, re-linearize, repeat until the mean
/// absolute voltage-magnitude change drops below epsilon or h_max is hit.
/// Throws OpfError when the LP is infeasible (naming the binding families).
DispatchSolution run_fbs_opf(const RadialNetwork& net, const std::vector<GeneratorSpec>& gens,
                             const OperatingLimits& limits, const Vec& p_d, const Vec& q_d,
                             double v_slack, double epsilon = 1e-4, int h_max = 4);

struct LimitViolation {
  std::string what;    // "branch" or "voltage"
  Index entity = 0;
  double value = 0.0;
  double limit = 0.0;
};

struct ProjectionReport {
  PowerFlowResult flow;            // exact power flow at the dispatched setpoints
  std::vector<LimitViolation> violations;
  double voltage_mae = 0.0;        // mean |v_lp - v_exact| over non-slack buses
  Vec lp_voltages;                 // per non-slack bus
};

/// Fixes the non-slack generator setpoints and runs the exact power flow;
/// the slack absorbs the residual. Reports true voltages, currents, losses
/// and any limit violations.
ProjectionReport project_dispatch(const RadialNetwork& net, const std::vector<GeneratorSpec>& gens,
                                  const OperatingLimits& limits, const Vec& p_d, const Vec& q_d,
                                  double v_slack, const DispatchSolution& dispatch);

}  // namespace fbsopf
