#include "fbsopf/storage.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace fbsopf {

namespace {

void validate_fleet(const std::vector<StorageSpec>& fleet) {
  for (const auto& s : fleet) {
    if (!(s.eta_ch > 0.0 && s.eta_ch <= 1.0) || !(s.eta_dis > 0.0 && s.eta_dis <= 1.0)) {
      throw InputError("storage '" + s.name + "' efficiencies must be in (0, 1]");
    }
    if (!(s.p_rated > 0.0)) throw InputError("storage '" + s.name + "' needs a positive power rating");
    if (!s.sizing && (s.e_min > s.e0 || s.e0 > s.e_max)) {
      throw InputError("storage '" + s.name + "' initial energy outside [e_min, e_max]");
    }
  }
}

}  // namespace

StorageDynamics build_storage_dynamics(const std::vector<StorageSpec>& fleet, const Horizon& horizon) {
  validate_fleet(fleet);
  if (horizon.steps < 1 || !(horizon.step_hours > 0.0)) throw InputError("invalid horizon");
  const Index ns = static_cast<Index>(fleet.size());
  const Index N = horizon.steps;
  const double T = horizon.step_hours;

  StorageDynamics dyn;
  dyn.B = Mat::Zero(ns, 2 * ns);
  for (Index s = 0; s < ns; ++s) {
    dyn.B(s, s) = -T / fleet[s].eta_dis;
    dyn.B(s, ns + s) = -T * fleet[s].eta_ch;
  }

  std::vector<Eigen::Triplet<double>> sx;
  sx.reserve(static_cast<std::size_t>(N) * ns);
  for (Index k = 0; k < N; ++k) {
    for (Index s = 0; s < ns; ++s) sx.emplace_back(k * ns + s, s, 1.0);
  }
  dyn.S_x.resize(N * ns, ns);
  dyn.S_x.setFromTriplets(sx.begin(), sx.end());

  std::vector<Eigen::Triplet<double>> su;
  su.reserve(static_cast<std::size_t>(N) * (N + 1) / 2 * 2 * ns);
  for (Index k = 0; k < N; ++k) {
    for (Index j = 0; j <= k; ++j) {
      for (Index s = 0; s < ns; ++s) {
        su.emplace_back(k * ns + s, 2 * ns * j + s, dyn.B(s, s));
        su.emplace_back(k * ns + s, 2 * ns * j + ns + s, dyn.B(s, ns + s));
      }
    }
  }
  dyn.S_u.resize(N * ns, 2 * N * ns);
  dyn.S_u.setFromTriplets(su.begin(), su.end());
  return dyn;
}

Mat reconstruct_energy(const StorageDynamics& dyn, const std::vector<StorageSpec>& fleet, const Vec& u) {
  const Index ns = static_cast<Index>(fleet.size());
  if (ns == 0) return Mat();
  const Index N = static_cast<Index>(dyn.S_x.rows()) / ns;
  if (u.size() != 2 * N * ns) throw InputError("storage input trajectory has wrong length");
  Vec e0(ns);
  for (Index s = 0; s < ns; ++s) e0[s] = fleet[s].e0;
  Vec stacked = dyn.S_x * e0 + dyn.S_u * u;
  Mat out(ns, N);
  for (Index k = 0; k < N; ++k) out.col(k) = stacked.segment(k * ns, ns);
  return out;
}

MultiperiodLayout multiperiod_layout(const RadialNetwork& net, const MultiperiodCase& c) {
  MultiperiodLayout lay;
  lay.n_grid_gens = static_cast<Index>(c.gens.size());
  lay.n_storage = static_cast<Index>(c.fleet.size());
  lay.n_gen_total = lay.n_grid_gens + 2 * lay.n_storage;
  lay.branches = net.branch_count();
  lay.buses = net.bus_count();
  lay.steps = c.horizon.steps;
  lay.per_period = 2 * lay.n_gen_total + 2 * lay.branches + (lay.buses - 1) + lay.n_storage;
  lay.sizing_vars = c.sizing && lay.n_storage > 0;
  return lay;
}

namespace {

// Generators for the LP: grid generators followed by the storage pairs.
std::vector<GeneratorSpec> expanded_generators(const MultiperiodCase& c) {
  std::vector<GeneratorSpec> gens = c.gens;
  gens.reserve(gens.size() + 2 * c.fleet.size());
  for (const auto& s : c.fleet) {
    GeneratorSpec dis;
    dis.bus = s.bus;
    dis.p_min = 0.0;
    dis.p_max = s.p_rated;
    dis.q_min = -s.p_rated;
    dis.q_max = s.p_rated;
    dis.name = s.name + ".dis";
    GeneratorSpec ch;
    ch.bus = s.bus;
    ch.p_min = -s.p_rated;
    ch.p_max = 0.0;
    ch.q_min = 0.0;
    ch.q_max = 0.0;
    ch.name = s.name + ".ch";
    gens.push_back(dis);
    gens.push_back(ch);
  }
  return gens;
}

}  // namespace

LpProblem assemble_multiperiod(const RadialNetwork& net, const LinearGridModel& model,
                               const MultiperiodCase& c) {
  const Index n = net.bus_count();
  const Index l = net.branch_count();
  const Index N = c.horizon.steps;
  const double T = c.horizon.step_hours;
  validate_fleet(c.fleet);

  const std::vector<GeneratorSpec> gens = expanded_generators(c);
  const MultiperiodLayout lay = multiperiod_layout(net, c);
  const Index ng = lay.n_gen_total;
  const Index ngrid = lay.n_grid_gens;
  const Index ns = lay.n_storage;

  if (c.load_p.rows() != n || c.load_p.cols() != N) {
    throw InputError("load_p series must be " + std::to_string(n) + " x " + std::to_string(N) +
                     ", got " + std::to_string(c.load_p.rows()) + " x " + std::to_string(c.load_p.cols()));
  }
  if (c.load_q.rows() != n || c.load_q.cols() != N) throw InputError("load_q series has wrong shape");
  if (c.gen_p_max.size() != 0 && (c.gen_p_max.rows() != ngrid || c.gen_p_max.cols() != N)) {
    throw InputError("gen_p_max series has wrong shape");
  }
  if (c.gen_cost.size() != 0 && (c.gen_cost.rows() != ngrid || c.gen_cost.cols() != N)) {
    throw InputError("gen_cost series has wrong shape");
  }

  // Guard against silently assembling something that cannot fit in memory.
  const double est_nnz = static_cast<double>(N) * (2.0 * ng * (n - 1) + 10.0 * l * ng + ng + 6.0 * l + 3.0 * ns);
  const double est_gb = est_nnz * 24.0 / 1e9;
  if (est_gb > c.memory_cap_gb) {
    throw InputError("estimated problem memory " + std::to_string(est_gb) + " GB exceeds cap of " +
                     std::to_string(c.memory_cap_gb) + " GB");
  }

  LpProblem p;
  const Index nv = lay.steps * lay.per_period + (lay.sizing_vars ? ns : 0);
  p.cost = Vec::Zero(nv);
  p.lower = Vec::Constant(nv, -std::numeric_limits<double>::infinity());
  p.upper = Vec::Constant(nv, std::numeric_limits<double>::infinity());

  // Register columns in layout order so arithmetic indices match the registry.
  for (Index k = 0; k < N; ++k) {
    for (Index g = 0; g < ng; ++g) {
      const Index j = p.vars.add(VarKind::GenP, g, k);
      const GeneratorSpec& gs = gens[g];
      p.lower[j] = gs.p_min;
      double cap = gs.p_max;
      if (g < ngrid && c.gen_p_max.size() != 0) cap = c.gen_p_max(g, k);
      p.upper[j] = std::max(cap, gs.p_min);
      double price = gs.cost;
      if (g < ngrid && c.gen_cost.size() != 0) price = c.gen_cost(g, k);
      if (price < 0.0) throw InputError("generator prices must be nonnegative");
      p.cost[j] = T * price;
    }
    for (Index g = 0; g < ng; ++g) {
      const Index j = p.vars.add(VarKind::GenQ, g, k);
      p.lower[j] = gens[g].q_min;
      p.upper[j] = gens[g].q_max;
    }
    for (Index b = 0; b < l; ++b) {
      const Index j = p.vars.add(VarKind::LossP, b, k);
      p.lower[j] = 0.0;
    }
    for (Index b = 0; b < l; ++b) {
      const Index j = p.vars.add(VarKind::LossQ, b, k);
      p.lower[j] = 0.0;
    }
    for (Index bus = 1; bus < n; ++bus) {
      const Index j = p.vars.add(VarKind::Voltage, bus, k);
      p.lower[j] = c.limits.v_min[bus];
      p.upper[j] = c.limits.v_max[bus];
    }
    for (Index s = 0; s < ns; ++s) {
      const Index j = p.vars.add(VarKind::StorageEnergy, s, k);
      if (c.sizing) {
        p.lower[j] = 0.0;  // e_min is pinned to zero in sizing mode
      } else {
        p.lower[j] = c.fleet[s].e_min;
        p.upper[j] = c.fleet[s].e_max;
      }
      if (c.terminal_soc && k == N - 1) p.lower[j] = std::max(p.lower[j], c.fleet[s].e0);
    }
  }
  if (lay.sizing_vars) {
    for (Index s = 0; s < ns; ++s) {
      const Index j = p.vars.add(VarKind::Capacity, s, 0);
      p.lower[j] = 0.0;
      p.cost[j] = horizon_scaled_capacity_cost(c.fleet[s].capacity_cost, c.horizon,
                                               c.fleet[s].calendar_life_years);
    }
  }

  const std::size_t nnz_guess = static_cast<std::size_t>(est_nnz);
  p.eq.reserve(nnz_guess / 2);
  p.ineq.reserve(nnz_guess);

  const Index eq_per_k = 1 + (n - 1) + ns;
  const Index in_per_k = 10 * l + (lay.sizing_vars ? ns : 0);
  p.eq_rhs = Vec::Zero(N * eq_per_k);
  p.ineq_rhs = Vec::Zero(N * in_per_k);

  for (Index k = 0; k < N; ++k) {
    const Vec p_d = c.load_p.col(k);
    const Vec q_d = c.load_q.col(k);
    Index erow = k * eq_per_k;

    // power balance
    for (Index g = 0; g < ng; ++g) p.eq.emplace_back(erow, lay.pg(g, k), 1.0);
    for (Index b = 0; b < l; ++b) {
      p.eq.emplace_back(erow, lay.plp(b, k), -1.0);
      p.eq.emplace_back(erow, lay.plq(b, k), -1.0);
    }
    p.eq_rhs[erow] = p_d.sum();
    ++erow;

    // voltage coupling
    for (Index bus = 1; bus < n; ++bus) {
      const Index r = bus - 1;
      for (Index g = 0; g < ng; ++g) {
        const double cp = model.B_v(r, gens[g].bus);
        const double cq = model.B_v(r, n + gens[g].bus);
        if (cp != 0.0) p.eq.emplace_back(erow, lay.pg(g, k), cp);
        if (cq != 0.0) p.eq.emplace_back(erow, lay.qg(g, k), cq);
      }
      p.eq.emplace_back(erow, lay.v(bus, k), -1.0);
      p.eq_rhs[erow] = model.B_v.row(r).head(n).dot(p_d) + model.B_v.row(r).tail(n).dot(q_d) - c.v_slack;
      ++erow;
    }

    // storage energy recursion: e(k) - e(k-1) + (T/eta_d) dis + (T eta_c) ch = [e0 at k=0]
    for (Index s = 0; s < ns; ++s) {
      p.eq.emplace_back(erow, lay.e(s, k), 1.0);
      if (k > 0) p.eq.emplace_back(erow, lay.e(s, k - 1), -1.0);
      p.eq.emplace_back(erow, lay.pg(lay.dis_gen(s), k), T / c.fleet[s].eta_dis);
      p.eq.emplace_back(erow, lay.pg(lay.ch_gen(s), k), T * c.fleet[s].eta_ch);
      p.eq_rhs[erow] = k == 0 ? c.fleet[s].e0 : 0.0;
      ++erow;
    }

    // loss planes and branch limits
    Index irow = k * in_per_k;
    Vec l0d = model.L0 * p_d;
    Vec l1d = model.L1 * p_d;
    Vec l0dq = model.L0 * q_d;
    Vec l1dq = model.L1 * q_d;
    Vec brd = model.B_r * p_d;
    auto emit_planes = [&](const Mat& plane, bool reactive, const Vec& rhs_load, const Vec& offset) {
      for (int sign = 0; sign < 2; ++sign) {
        const double s = sign == 0 ? 1.0 : -1.0;
        for (Index b = 0; b < l; ++b) {
          for (Index g = 0; g < ng; ++g) {
            const double coef = plane(b, gens[g].bus);
            if (coef != 0.0) {
              p.ineq.emplace_back(irow, reactive ? lay.qg(g, k) : lay.pg(g, k), s * coef);
            }
          }
          p.ineq.emplace_back(irow, reactive ? lay.plq(b, k) : lay.plp(b, k), -1.0);
          p.ineq_rhs[irow] = s * rhs_load[b] - offset[b];
          ++irow;
        }
      }
    };
    const Vec zero_off = Vec::Zero(l);
    emit_planes(model.L0, false, l0d, zero_off);
    emit_planes(model.L1, false, l1d, model.b);
    emit_planes(model.L0, true, l0dq, zero_off);
    emit_planes(model.L1, true, l1dq, model.b);

    for (int sign = 0; sign < 2; ++sign) {
      const double s = sign == 0 ? 1.0 : -1.0;
      for (Index b = 0; b < l; ++b) {
        for (Index g = 0; g < ng; ++g) {
          const double coef = model.B_r(b, gens[g].bus);
          if (coef != 0.0) p.ineq.emplace_back(irow, lay.pg(g, k), s * coef);
        }
        p.ineq_rhs[irow] = c.limits.i_b_max[b] + s * brd[b];
        ++irow;
      }
    }

    // sizing: e(k) <= z
    if (lay.sizing_vars) {
      for (Index s = 0; s < ns; ++s) {
        p.ineq.emplace_back(irow, lay.e(s, k), 1.0);
        p.ineq.emplace_back(irow, lay.z(s), -1.0);
        p.ineq_rhs[irow] = 0.0;
        ++irow;
      }
    }
  }

  p.check_consistency();
  return p;
}

MultiperiodSolution decode_multiperiod(const LpProblem& problem, const LpSolution& sol,
                                       const MultiperiodLayout& lay, const MultiperiodCase& c) {
  MultiperiodSolution out;
  const Index N = lay.steps;
  const Index ng = lay.n_gen_total;
  const Index ns = lay.n_storage;
  out.p_gen = Mat(ng, N);
  out.q_gen = Mat(ng, N);
  out.loss_p = Mat(lay.branches, N);
  out.loss_q = Mat(lay.branches, N);
  out.v = Mat(lay.buses - 1, N);
  out.energy = Mat(ns, N);
  for (Index k = 0; k < N; ++k) {
    for (Index g = 0; g < ng; ++g) {
      out.p_gen(g, k) = sol.x[lay.pg(g, k)];
      out.q_gen(g, k) = sol.x[lay.qg(g, k)];
    }
    for (Index b = 0; b < lay.branches; ++b) {
      out.loss_p(b, k) = sol.x[lay.plp(b, k)];
      out.loss_q(b, k) = sol.x[lay.plq(b, k)];
    }
    for (Index bus = 1; bus < lay.buses; ++bus) out.v(bus - 1, k) = sol.x[lay.v(bus, k)];
    for (Index s = 0; s < ns; ++s) out.energy(s, k) = sol.x[lay.e(s, k)];
  }
  out.z = Vec::Zero(ns);
  if (lay.sizing_vars) {
    for (Index s = 0; s < ns; ++s) out.z[s] = sol.x[lay.z(s)];
  } else {
    for (Index s = 0; s < ns; ++s) out.z[s] = c.fleet[s].e_max;
  }
  out.objective = sol.objective;
  out.iterations = sol.iterations;
  out.storage_cost = 0.0;
  if (lay.sizing_vars) {
    for (Index s = 0; s < ns; ++s) {
      out.storage_cost += problem.cost[lay.z(s)] * out.z[s];
    }
  }
  out.operational_cost = out.objective - out.storage_cost;
  return out;
}

double horizon_scaled_capacity_cost(double cost, const Horizon& horizon, double life_years) {
  if (!(life_years > 0.0)) throw InputError("calendar life must be positive");
  return cost * horizon.days() / (life_years * 365.0);
}

std::vector<SizingResult> solve_sizing(const RadialNetwork& net, const LinearGridModel& model,
                                       const MultiperiodCase& c, const std::vector<double>& cost_points,
                                       const SolverOptions& options) {
  if (!c.sizing) throw InputError("solve_sizing needs a sizing-mode case");
  MultiperiodCase cs = c;
  LpProblem lp = assemble_multiperiod(net, model, cs);
  const MultiperiodLayout lay = multiperiod_layout(net, cs);

  std::vector<SizingResult> results;
  LpSolution prev;
  for (double point : cost_points) {
    for (Index s = 0; s < lay.n_storage; ++s) {
      lp.cost[lay.z(s)] = horizon_scaled_capacity_cost(point, c.horizon, c.fleet[s].calendar_life_years);
    }
    const auto t0 = std::chrono::steady_clock::now();
    LpSolution sol = prev.status == LpStatus::Optimal ? warm_start(lp, prev, options) : solve_lp(lp, options);
    const auto t1 = std::chrono::steady_clock::now();

    SizingResult r;
    r.cost_point = point;
    r.effective_cost = lay.n_storage > 0
                           ? horizon_scaled_capacity_cost(point, c.horizon, c.fleet[0].calendar_life_years)
                           : 0.0;
    r.status = sol.status;
    r.solve_seconds = std::chrono::duration<double>(t1 - t0).count();
    r.iterations = sol.iterations;
    if (sol.status == LpStatus::Optimal) {
      r.dispatch = decode_multiperiod(lp, sol, lay, cs);
      r.z = r.dispatch.z;
      r.objective = r.dispatch.objective;
      r.operational_cost = r.dispatch.operational_cost;
      r.storage_cost = r.dispatch.storage_cost;
      prev = std::move(sol);
    } else {
      r.z = Vec::Zero(lay.n_storage);
    }
    results.push_back(std::move(r));
  }
  return results;
}

Revenue compute_revenue(const SizingResult& with_storage, double baseline_operational_cost) {
  Revenue rev;
  rev.revenue = baseline_operational_cost - with_storage.operational_cost;
  rev.profit = rev.revenue - with_storage.storage_cost;
  return rev;
}

std::vector<PlacementEntry> placement_profile(const RadialNetwork& net,
                                              const std::vector<StorageSpec>& fleet,
                                              const SizingResult& result) {
  std::vector<PlacementEntry> entries;
  for (std::size_t s = 0; s < fleet.size(); ++s) {
    PlacementEntry e;
    e.bus = fleet[s].bus;
    e.label = net.buses[fleet[s].bus].label;
    e.capacity = result.z.size() ? result.z[static_cast<Index>(s)] : 0.0;
    entries.push_back(e);
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const PlacementEntry& a, const PlacementEntry& b) { return a.capacity > b.capacity; });
  return entries;
}

}  // namespace fbsopf
