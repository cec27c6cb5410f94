#include "fbsopf/opf.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fbsopf {

OperatingLimits OperatingLimits::from_network(const RadialNetwork& net, double v_min, double v_max) {
  OperatingLimits lim;
  lim.v_min = Vec::Constant(net.bus_count(), v_min);
  lim.v_max = Vec::Constant(net.bus_count(), v_max);
  lim.i_b_max = Vec(net.branch_count());
  for (Index b = 0; b < net.branch_count(); ++b) lim.i_b_max[b] = net.branches[b].current_limit_pu;
  return lim;
}

Mat generator_map(const RadialNetwork& net, const std::vector<GeneratorSpec>& gens) {
  Mat cg = Mat::Zero(net.bus_count(), static_cast<Index>(gens.size()));
  for (std::size_t g = 0; g < gens.size(); ++g) {
    const Index bus = gens[g].bus;
    if (bus < 0 || bus >= net.bus_count()) {
      throw InputError("generator '" + gens[g].name + "' maps to unknown bus " + std::to_string(bus));
    }
    cg(bus, static_cast<Index>(g)) = 1.0;
  }
  return cg;
}

namespace {

void validate_gens(const std::vector<GeneratorSpec>& gens) {
  for (const auto& g : gens) {
    if (g.p_min > g.p_max || g.q_min > g.q_max) {
      throw InputError("generator '" + g.name + "' has crossed bounds");
    }
    if (!std::isfinite(g.cost) || g.cost < 0.0) {
      throw InputError("generator '" + g.name + "' needs a finite nonnegative price");
    }
  }
}

}  // namespace

LpProblem assemble_single_period(const RadialNetwork& net, const LinearGridModel& model,
                                 const std::vector<GeneratorSpec>& gens,
                                 const OperatingLimits& limits, const Vec& p_d, const Vec& q_d,
                                 double v_slack) {
  const Index n = net.bus_count();
  const Index l = net.branch_count();
  const Index ng = static_cast<Index>(gens.size());
  if (p_d.size() != n || q_d.size() != n) throw InputError("load vectors must match bus count");
  if (limits.v_min.size() != n || limits.v_max.size() != n || limits.i_b_max.size() != l) {
    throw InputError("operating limits do not match network dimensions");
  }
  if (model.B_v.rows() != n - 1 || model.B_r.rows() != l) {
    throw InputError("linear model does not match network dimensions");
  }
  validate_gens(gens);

  LpProblem p;
  const Index nv = 2 * ng + 2 * l + (n - 1);
  p.cost = Vec::Zero(nv);
  p.lower = Vec::Constant(nv, -std::numeric_limits<double>::infinity());
  p.upper = Vec::Constant(nv, std::numeric_limits<double>::infinity());

  for (Index g = 0; g < ng; ++g) {
    const Index j = p.vars.add(VarKind::GenP, g, 0);
    p.cost[j] = gens[g].cost;
    p.lower[j] = gens[g].p_min;
    p.upper[j] = gens[g].p_max;
  }
  for (Index g = 0; g < ng; ++g) {
    const Index j = p.vars.add(VarKind::GenQ, g, 0);
    p.lower[j] = gens[g].q_min;
    p.upper[j] = gens[g].q_max;
  }
  for (Index b = 0; b < l; ++b) {
    const Index j = p.vars.add(VarKind::LossP, b, 0);
    p.lower[j] = 0.0;  // implied by the loss planes; keeps the column bounded
  }
  for (Index b = 0; b < l; ++b) {
    const Index j = p.vars.add(VarKind::LossQ, b, 0);
    p.lower[j] = 0.0;
  }
  for (Index bus = 1; bus < n; ++bus) {
    const Index j = p.vars.add(VarKind::Voltage, bus, 0);
    p.lower[j] = limits.v_min[bus];
    p.upper[j] = limits.v_max[bus];
  }

  auto pg = [&p](Index g) { return p.vars.find(VarKind::GenP, g, 0); };
  auto qg = [&p](Index g) { return p.vars.find(VarKind::GenQ, g, 0); };
  auto plp = [&p](Index b) { return p.vars.find(VarKind::LossP, b, 0); };
  auto plq = [&p](Index b) { return p.vars.find(VarKind::LossQ, b, 0); };
  auto vv = [&p](Index bus) { return p.vars.find(VarKind::Voltage, bus, 0); };

  // (a) power balance
  Index row = 0;
  for (Index g = 0; g < ng; ++g) p.eq.emplace_back(row, pg(g), 1.0);
  for (Index b = 0; b < l; ++b) {
    p.eq.emplace_back(row, plp(b), -1.0);
    p.eq.emplace_back(row, plq(b), -1.0);
  }
  p.row_labels_eq.push_back("balance");
  ++row;

  // (b) voltage coupling: B_v [Cg pg; Cg qg] - v = B_v [p_d; q_d] - v_s
  for (Index bus = 1; bus < n; ++bus) {
    const Index r = bus - 1;
    for (Index g = 0; g < ng; ++g) {
      const double cp = model.B_v(r, gens[g].bus);
      const double cq = model.B_v(r, n + gens[g].bus);
      if (cp != 0.0) p.eq.emplace_back(row, pg(g), cp);
      if (cq != 0.0) p.eq.emplace_back(row, qg(g), cq);
    }
    p.eq.emplace_back(row, vv(bus), -1.0);
    p.row_labels_eq.push_back("voltage[" + std::to_string(bus) + "]");
    ++row;
  }
  p.eq_rhs = Vec(row);
  p.eq_rhs[0] = p_d.sum();
  for (Index bus = 1; bus < n; ++bus) {
    const Index r = bus - 1;
    p.eq_rhs[bus] = model.B_v.row(r).head(n).dot(p_d) + model.B_v.row(r).tail(n).dot(q_d) - v_slack;
  }

  // (c)-(j) loss epigraphs, one family of four planes per branch for p and q
  Index irow = 0;
  auto emit_planes = [&](const Mat& plane, auto loss_var, auto gen_var, const char* tag) {
    for (int sign = 0; sign < 2; ++sign) {
      const double s = sign == 0 ? 1.0 : -1.0;
      for (Index b = 0; b < l; ++b) {
        for (Index g = 0; g < ng; ++g) {
          const double c = plane(b, gens[g].bus);
          if (c != 0.0) p.ineq.emplace_back(irow, gen_var(g), s * c);
        }
        p.ineq.emplace_back(irow, loss_var(b), -1.0);
        p.row_labels_ineq.push_back(std::string(tag) + (sign == 0 ? "+" : "-") + "[" + std::to_string(b) + "]");
        ++irow;
      }
    }
  };
  emit_planes(model.L0, plp, pg, "loss_p_inner");
  emit_planes(model.L1, plp, pg, "loss_p_outer");
  emit_planes(model.L0, plq, qg, "loss_q_inner");
  emit_planes(model.L1, plq, qg, "loss_q_outer");

  // (k) branch flow limits
  for (int sign = 0; sign < 2; ++sign) {
    const double s = sign == 0 ? 1.0 : -1.0;
    for (Index b = 0; b < l; ++b) {
      for (Index g = 0; g < ng; ++g) {
        const double c = model.B_r(b, gens[g].bus);
        if (c != 0.0) p.ineq.emplace_back(irow, pg(g), s * c);
      }
      p.row_labels_ineq.push_back(std::string("branch") + (sign == 0 ? "+" : "-") + "[" + std::to_string(b) + "]");
      ++irow;
    }
  }

  p.ineq_rhs = Vec(irow);
  Index rr = 0;
  Vec l0d = model.L0 * p_d;
  Vec l1d = model.L1 * p_d;
  Vec l0dq = model.L0 * q_d;
  Vec l1dq = model.L1 * q_d;
  Vec brd = model.B_r * p_d;
  for (Index b = 0; b < l; ++b) p.ineq_rhs[rr++] = l0d[b];
  for (Index b = 0; b < l; ++b) p.ineq_rhs[rr++] = -l0d[b];
  for (Index b = 0; b < l; ++b) p.ineq_rhs[rr++] = l1d[b] - model.b[b];
  for (Index b = 0; b < l; ++b) p.ineq_rhs[rr++] = -l1d[b] - model.b[b];
  for (Index b = 0; b < l; ++b) p.ineq_rhs[rr++] = l0dq[b];
  for (Index b = 0; b < l; ++b) p.ineq_rhs[rr++] = -l0dq[b];
  for (Index b = 0; b < l; ++b) p.ineq_rhs[rr++] = l1dq[b] - model.b[b];
  for (Index b = 0; b < l; ++b) p.ineq_rhs[rr++] = -l1dq[b] - model.b[b];
  for (Index b = 0; b < l; ++b) p.ineq_rhs[rr++] = limits.i_b_max[b] + brd[b];
  for (Index b = 0; b < l; ++b) p.ineq_rhs[rr++] = limits.i_b_max[b] - brd[b];

  p.check_consistency();
  return p;
}

DispatchSolution decode_dispatch(const LpProblem& problem, const LpSolution& sol,
                                 Index n_gens, Index n_branches, Index n_buses) {
  DispatchSolution d;
  d.p_gen = Vec(n_gens);
  d.q_gen = Vec(n_gens);
  for (Index g = 0; g < n_gens; ++g) {
    d.p_gen[g] = sol.value(problem, VarKind::GenP, g, 0);
    d.q_gen[g] = sol.value(problem, VarKind::GenQ, g, 0);
  }
  d.loss_p = Vec(n_branches);
  d.loss_q = Vec(n_branches);
  for (Index b = 0; b < n_branches; ++b) {
    d.loss_p[b] = sol.value(problem, VarKind::LossP, b, 0);
    d.loss_q[b] = sol.value(problem, VarKind::LossQ, b, 0);
  }
  d.v = Vec(n_buses - 1);
  for (Index bus = 1; bus < n_buses; ++bus) d.v[bus - 1] = sol.value(problem, VarKind::Voltage, bus, 0);
  d.objective = sol.objective;
  return d;
}

namespace {

std::string binding_families(const LpProblem& p, const LpSolution& sol) {
  // rank |y| and report the worst offenders by label family
  std::vector<std::pair<double, std::string>> worst;
  for (Index r = 0; r < sol.y_eq.size(); ++r) {
    worst.emplace_back(std::abs(sol.y_eq[r]), r < static_cast<Index>(p.row_labels_eq.size()) ? p.row_labels_eq[r] : "eq");
  }
  for (Index r = 0; r < sol.y_ineq.size(); ++r) {
    worst.emplace_back(std::abs(sol.y_ineq[r]), r < static_cast<Index>(p.row_labels_ineq.size()) ? p.row_labels_ineq[r] : "ineq");
  }
  std::sort(worst.begin(), worst.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::ostringstream os;
  for (std::size_t i = 0; i < std::min<std::size_t>(3, worst.size()); ++i) {
    if (worst[i].first <= 0) break;
    if (i) os << ", ";
    os << worst[i].second;
  }
  return os.str();
}

}  // namespace

DispatchSolution run_fbs_opf(const RadialNetwork& net, const std::vector<GeneratorSpec>& gens,
                             const OperatingLimits& limits, const Vec& p_d, const Vec& q_d,
                             double v_slack, double epsilon, int h_max) {
  if (!(epsilon >= 0.0)) throw InputError("epsilon must be nonnegative");
  if (h_max < 1) throw InputError("h_max must be at least 1");
  const Index n = net.bus_count();
  const BibcMatrix bibc = build_bibc(net);
  const Mat cg = generator_map(net, gens);

  Vec p_max(static_cast<Index>(gens.size()));
  for (std::size_t g = 0; g < gens.size(); ++g) p_max[static_cast<Index>(g)] = gens[g].p_max;
  const SupportingCurrents sc = default_supporting_currents(bibc, cg, p_max);

  ComplexVoltageState state;
  state.v_slack = Complex(v_slack, 0.0);
  state.v = CVec::Constant(n, state.v_slack);

  DispatchSolution dispatch;
  LpSolution prev;
  double mae = 0.0;
  int h = 0;
  while (h < h_max) {
    const Vec vmag = state.magnitudes();
    const LinearGridModel model = build_linear_model(net, bibc, vmag, sc.i0, sc.i1);
    LpProblem lp = assemble_single_period(net, model, gens, limits, p_d, q_d, v_slack);
    LpSolution sol = prev.status == LpStatus::Optimal ? warm_start(lp, prev) : solve_lp(lp);
    if (sol.status != LpStatus::Optimal) {
      throw OpfError(std::string("OPF LP ") + lp_status_name(sol.status) + " at iteration " +
                         std::to_string(h + 1) +
                         (sol.status == LpStatus::Infeasible ? "; binding: " + binding_families(lp, sol) : ""),
                     sol.status);
    }
    dispatch = decode_dispatch(lp, sol, static_cast<Index>(gens.size()), net.branch_count(), n);
    dispatch.voltage_state = vmag;
    prev = std::move(sol);
    ++h;

    // forward currents at the dispatched injections, then the backward update
    InjectionSet inj;
    inj.p = cg * dispatch.p_gen - p_d;
    inj.q = cg * dispatch.q_gen - q_d;
    CVec currents = nodal_currents(state, inj);
    currents[0] = Complex{0.0, 0.0};
    ComplexVoltageState next = backward_voltage_update(net, bibc, currents, state.v_slack);
    mae = (next.magnitudes() - state.magnitudes()).cwiseAbs().mean();
    state = next;
    if (mae <= epsilon) break;
  }
  dispatch.iterations = h;
  dispatch.final_voltage_mae = mae;
  return dispatch;
}

ProjectionReport project_dispatch(const RadialNetwork& net, const std::vector<GeneratorSpec>& gens,
                                  const OperatingLimits& limits, const Vec& p_d, const Vec& q_d,
                                  double v_slack, const DispatchSolution& dispatch) {
  const Index n = net.bus_count();
  const BibcMatrix bibc = build_bibc(net);
  const Mat cg = generator_map(net, gens);

  InjectionSet inj;
  inj.p = cg * dispatch.p_gen - p_d;
  inj.q = cg * dispatch.q_gen - q_d;

  ProjectionReport report;
  report.flow = solve_power_flow(net, bibc, inj, Complex(v_slack, 0.0));
  report.lp_voltages = dispatch.v;

  double mae = 0.0;
  for (Index bus = 1; bus < n; ++bus) {
    mae += std::abs(dispatch.v[bus - 1] - std::abs(report.flow.state.v[bus]));
  }
  report.voltage_mae = mae / static_cast<double>(n - 1);

  for (Index b = 0; b < net.branch_count(); ++b) {
    const double ib = std::abs(report.flow.branch_currents[b]);
    if (ib > limits.i_b_max[b] + 1e-9) {
      report.violations.push_back({"branch", b, ib, limits.i_b_max[b]});
    }
  }
  for (Index bus = 1; bus < n; ++bus) {
    const double vm = std::abs(report.flow.state.v[bus]);
    if (vm > limits.v_max[bus] + 1e-9) report.violations.push_back({"voltage", bus, vm, limits.v_max[bus]});
    if (vm < limits.v_min[bus] - 1e-9) report.violations.push_back({"voltage", bus, vm, limits.v_min[bus]});
  }
  return report;
}

}  // namespace fbsopf
