#include "fbsopf/powerflow.hpp"

#include <cmath>

namespace fbsopf {

CVec nodal_currents(const ComplexVoltageState& state, const InjectionSet& inj) {
  const Eigen::Index n = state.v.size();
  if (inj.p.size() != n || inj.q.size() != n) throw InputError("injection vectors must match bus count");
  CVec i(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (std::abs(state.v[j]) <= 0.0) throw PowerFlowError("zero voltage magnitude at bus " + std::to_string(j));
    i[j] = std::conj(Complex(inj.p[j], inj.q[j]) / state.v[j]);
  }
  return i;
}

ComplexVoltageState backward_voltage_update(const RadialNetwork& net, const BibcMatrix& bibc,
                                            const CVec& currents, Complex v_slack) {
  const Index n = net.bus_count();
  const Index l = net.branch_count();
  if (currents.size() != n) throw InputError("current vector must match bus count");

  CVec zb(l);
  for (Index b = 0; b < l; ++b) zb[b] = Complex(net.branches[b].resistance_pu, net.branches[b].reactance_pu);

  CVec ib = bibc.full.cast<Complex>() * currents;
  CVec drops = bibc.reduced.transpose().cast<Complex>() * zb.cwiseProduct(ib);

  ComplexVoltageState out;
  out.v_slack = v_slack;
  out.v = CVec::Constant(n, v_slack);
  // Injection currents are generation-positive, so exporting buses sit above
  // the slack voltage.
  out.v.tail(n - 1) += drops;
  return out;
}

PowerFlowResult solve_power_flow(const RadialNetwork& net, const BibcMatrix& bibc,
                                 const InjectionSet& inj, Complex v_slack, double tol, int max_iter) {
  if (!(tol > 0.0)) throw InputError("power flow tolerance must be positive");
  if (max_iter < 1) throw InputError("max_iter must be at least 1");
  const Index n = net.bus_count();
  if (inj.p.size() != n || inj.q.size() != n) throw InputError("injection vectors must match bus count");

  ComplexVoltageState state;
  state.v_slack = v_slack;
  state.v = CVec::Constant(n, v_slack);

  PowerFlowResult result;
  for (int it = 1; it <= max_iter; ++it) {
    CVec i = nodal_currents(state, inj);
    i[0] = Complex{0.0, 0.0};  // slack injection is implied, not specified
    ComplexVoltageState next = backward_voltage_update(net, bibc, i, v_slack);
    double mae = (next.v - state.v).cwiseAbs().mean();
    result.mae_trace.push_back(mae);
    state = next;
    if (mae < tol) {
      result.iterations = it;
      result.state = state;
      CVec currents = nodal_currents(state, inj);
      currents[0] = Complex{0.0, 0.0};
      result.branch_currents = bibc.full.cast<Complex>() * currents;
      result.branch_loss = Vec(net.branch_count());
      for (Index b = 0; b < net.branch_count(); ++b) {
        result.branch_loss[b] = net.branches[b].resistance_pu * std::norm(result.branch_currents[b]);
      }
      result.total_loss = result.branch_loss.sum();
      // Branch currents carry the downstream injection sums, so the slack
      // supplies their negative through its incident branches.
      Complex i_slack{0.0, 0.0};
      for (Index b = 0; b < net.branch_count(); ++b) {
        if (net.branches[b].from_bus == 0) i_slack -= result.branch_currents[b];
      }
      result.slack_injection = v_slack * std::conj(i_slack);
      return result;
    }
  }
  throw PowerFlowError("power flow did not converge within " + std::to_string(max_iter) +
                       " iterations (mae " + std::to_string(result.mae_trace.back()) + ")");
}

}  // namespace fbsopf
