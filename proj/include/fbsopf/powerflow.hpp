#pragma once

#include <complex>
#include <vector>

#include "fbsopf/grid.hpp"

namespace fbsopf {

using Complex = std::complex<double>;
using CVec = Eigen::VectorXcd;

class PowerFlowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-bus complex line-to-neutral voltages in per-unit. Entry 0 is pinned to
/// the slack voltage.
struct ComplexVoltageState {
  CVec v;
  Complex v_slack{1.0, 0.0};

  Vec magnitudes() const { return v.cwiseAbs(); }
};

/// Net per-bus injections (generation positive, consumption negative).
/// The slack entry is implied by the power balance and ignored by the sweep.
struct InjectionSet {
  Vec p;
  Vec q;
};

/// i_j = conj((p_j + j q_j) / v_j). Throws on zero voltage magnitude.
CVec nodal_currents(const ComplexVoltageState& state, const InjectionSet& inj);

/// Backward stage: v = v_s + M^T (R_d + jX_d) M_f i for non-slack buses.
ComplexVoltageState backward_voltage_update(const RadialNetwork& net, const BibcMatrix& bibc,
                                            const CVec& currents, Complex v_slack);

struct PowerFlowResult {
  ComplexVoltageState state;
  CVec branch_currents;      // M_f i at the converged state
  Vec branch_loss;           // r_b |i_b|^2 per branch
  double total_loss = 0.0;
  Complex slack_injection;   // power the slack feeds into the network
  int iterations = 0;
  std::vector<double> mae_trace;  // mean |v_new - v_old| per iteration
};

/// Forward/backward sweep load flow. Iterates until the mean absolute voltage
/// change drops below tol; throws PowerFlowError if max_iter is exhausted.
PowerFlowResult solve_power_flow(const RadialNetwork& net, const BibcMatrix& bibc,
                                 const InjectionSet& inj, Complex v_slack = Complex{1.0, 0.0},
                                 double tol = 1e-8, int max_iter = 50);

}  // namespace fbsopf
