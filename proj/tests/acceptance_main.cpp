// Acceptance suite: one check per criterion, each printed as a PASS/FAIL
// line. Exits nonzero if any criterion fails. Expected wall time is dominated
// by the two month-long sizing sweeps (a few minutes each).

#include <chrono>
#include <cstdio>
#include <vector>

#include "fbsopf/studies.hpp"
#include "support/helpers.hpp"

using namespace fbsopf;
using namespace fbsopf::test;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& what, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion, what.c_str(),
              detail.c_str());
  if (!pass) ++failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// --- 1: exact load flow against the closed-form two-bus solution ------------

void criterion_1() {
  const double r = 0.1;
  RadialNetwork net = two_bus(r, 0.0);
  BibcMatrix bibc = build_bibc(net);

  bool pass = true;
  double worst = 0.0;
  auto rng = test_rng(11);
  std::uniform_real_distribution<double> uload(0.01, 0.2);
  // warm-up + timing over repeated randomized loads
  const auto t0 = std::chrono::steady_clock::now();
  int runs = 0;
  for (int i = 0; i < 50; ++i) {
    const double p_load = uload(rng);
    InjectionSet inj;
    inj.p = Vec::Zero(2);
    inj.q = Vec::Zero(2);
    inj.p[1] = -p_load;
    PowerFlowResult res = solve_power_flow(net, bibc, inj, Complex(1.0, 0.0), 1e-12, 100);
    const double v_exact = 0.5 * (1.0 + std::sqrt(1.0 - 4.0 * r * p_load));
    worst = std::max(worst, std::abs(std::abs(res.state.v[1]) - v_exact));
    ++runs;
  }
  const double per_run_ms = seconds_since(t0) * 1000.0 / runs;
  pass = worst <= 1e-8 && per_run_ms < 1.0;
  char detail[128];
  std::snprintf(detail, sizeof(detail), "max |v - closed form| = %.2e pu, %.3f ms/solve", worst,
                per_run_ms);
  report(1, pass, "two-bus load flow matches the quadratic root to 1e-8 in under 1 ms", detail);
}

// --- 2: loss-plane geometry on every cigre branch ----------------------------

void criterion_2() {
  Scenario sc = load_scenario(data_dir() / "scenario_cigre_opf.json");
  const RadialNetwork& net = sc.net;
  BibcMatrix bibc = build_bibc(net);
  std::vector<GeneratorSpec> gens = sc.generator_specs();
  Vec p_max(static_cast<Index>(gens.size()));
  for (std::size_t g = 0; g < gens.size(); ++g) p_max[static_cast<Index>(g)] = gens[g].p_max;
  SupportingCurrents scur = default_supporting_currents(bibc, generator_map(net, gens), p_max);
  LinearGridModel model = build_linear_model(net, bibc, Vec::Ones(net.bus_count()), scur.i0, scur.i1);

  double worst_exact = 0.0;
  bool over_ok = true, under_ok = true;
  for (Index b = 0; b < net.branch_count(); ++b) {
    const double r = net.branches[b].resistance_pu;
    const Index bus = net.branches[b].to_bus;
    auto loss_at = [&](double current) {
      Vec x = Vec::Zero(net.bus_count());
      x[bus] = current;
      return pwl_loss_eval(model, x)[b];
    };
    for (double s : {-1.0, 0.0, 1.0}) {
      if (s == 0.0) {
        worst_exact = std::max(worst_exact, std::abs(loss_at(0.0)));
        continue;
      }
      worst_exact = std::max(worst_exact, std::abs(loss_at(s * scur.i0[b]) - r * scur.i0[b] * scur.i0[b]));
      worst_exact = std::max(worst_exact, std::abs(loss_at(s * scur.i1[b]) - r * scur.i1[b] * scur.i1[b]));
    }
    for (int k = 1; k <= 30; ++k) {
      const double i = scur.i1[b] * k / 31.0;
      if (loss_at(i) < r * i * i - 1e-12) over_ok = false;
    }
    const double beyond = scur.i0[b] + scur.i1[b];
    if (loss_at(beyond) > r * beyond * beyond + 1e-12) under_ok = false;
  }
  char detail[128];
  std::snprintf(detail, sizeof(detail), "max support-point error %.2e, over/under hold: %s/%s",
                worst_exact, over_ok ? "yes" : "no", under_ok ? "yes" : "no");
  report(2, worst_exact <= 1e-12 && over_ok && under_ok,
         "piecewise losses exact at supports, secant over/under elsewhere", detail);
}

// --- 3/4/5: convergence, conservatism and self-optimality --------------------

void criteria_3_4_5() {
  Scenario sc = load_scenario(data_dir() / "scenario_cigre_opf.json");
  const std::vector<GeneratorSpec> gens = sc.generator_specs();
  const OperatingLimits limits = sc.limits();
  Vec p_d, q_d;
  sc.period_loads(0, p_d, q_d);

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<DispatchSolution> runs;
  std::vector<ProjectionReport> projections;
  for (int h = 1; h <= 4; ++h) {
    runs.push_back(run_fbs_opf(sc.net, gens, limits, p_d, q_d, sc.v_slack, 0.0, h));
    projections.push_back(project_dispatch(sc.net, gens, limits, p_d, q_d, sc.v_slack, runs.back()));
  }
  const double elapsed = seconds_since(t0);

  // 3: voltage error at h=1 and monotone refinement
  bool mono = true;
  for (std::size_t i = 1; i < projections.size(); ++i) {
    if (projections[i].voltage_mae > projections[i - 1].voltage_mae + 1e-9) mono = false;
  }
  {
    char detail[160];
    std::snprintf(detail, sizeof(detail), "MAE(h)=%.3e/%.3e/%.3e/%.3e pu, %.1f s",
                  projections[0].voltage_mae, projections[1].voltage_mae, projections[2].voltage_mae,
                  projections[3].voltage_mae, elapsed);
    report(3, projections[0].voltage_mae <= 5e-3 && mono && elapsed < 10.0,
           "h=1 voltage error within 5e-3 pu and non-increasing over h", detail);
  }

  // 4: projected voltages never above the LP estimate nor the upper limit
  double max_overshoot = -1.0;
  bool within_limits = true;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    for (Index bus = 1; bus < sc.net.bus_count(); ++bus) {
      const double v_exact = std::abs(projections[i].flow.state.v[bus]);
      if (i == 0) max_overshoot = std::max(max_overshoot, v_exact - runs[i].v[bus - 1]);
      if (v_exact > limits.v_max[bus] + 1e-9) within_limits = false;
    }
  }
  {
    char detail[128];
    std::snprintf(detail, sizeof(detail), "max (exact - LP) voltage = %.2e pu at h=1, limits kept: %s",
                  max_overshoot, within_limits ? "yes" : "no");
    report(4, max_overshoot <= 1e-6 && within_limits,
           "projection is conservative: exact voltages below LP values and v_max", detail);
  }

  // 5: early-iteration objective against the converged sweep
  const double rel = std::abs(runs[0].objective - runs[3].objective) / std::abs(runs[3].objective);
  {
    char detail[128];
    std::snprintf(detail, sizeof(detail), "J(1)=%.6f, J(4)=%.6f, rel diff %.3f%%", runs[0].objective,
                  runs[3].objective, rel * 100.0);
    report(5, rel <= 0.03, "h=1 objective within 3% of the converged objective", detail);
  }
}

// --- 6: arbitrage threshold ---------------------------------------------------

void criterion_6() {
  RadialNetwork net = two_bus();
  BibcMatrix bibc = build_bibc(net);
  LinearGridModel model = build_linear_model(net, bibc, Vec::Ones(2), Vec::Constant(1, 0.25),
                                             Vec::Constant(1, 0.75));
  const double eta_rt = 0.88 * 0.88;

  auto solve_ratio = [&](double ratio) {
    StorageSpec bat;
    bat.bus = 0;
    bat.p_rated = 1.0;
    bat.eta_ch = 0.88;
    bat.eta_dis = 0.88;
    bat.e_max = 5.0;
    bat.name = "bat";
    MultiperiodCase c;
    c.gens = {{0, -10.0, 10.0, -10.0, 10.0, 0.0, "feeder"}};
    c.fleet = {bat};
    c.limits = OperatingLimits::from_network(net, 0.8, 1.2);
    c.horizon = {2, 1.0};
    c.load_p = Mat::Zero(2, 2);
    c.load_q = Mat::Zero(2, 2);
    c.gen_cost = Mat(1, 2);
    c.gen_cost << 1.0, ratio;
    LpProblem lp = assemble_multiperiod(net, model, c);
    LpSolution sol = solve_lp(lp);
    MultiperiodSolution d = decode_multiperiod(lp, sol, multiperiod_layout(net, c), c);
    return d.p_gen.row(1).cwiseAbs().maxCoeff();  // discharge activity
  };

  const double above = solve_ratio(1.01 / eta_rt);
  const double below = solve_ratio(0.99 / eta_rt);
  char detail[128];
  std::snprintf(detail, sizeof(detail), "discharge above threshold %.4f pu, below %.2e pu", above, below);
  report(6, above > 0.7 && below < 1e-5,
         "storage trades iff the price ratio clears 1/(0.88*0.88), 1% margins", detail);
}

// --- 7/8/9/10 share the month scenario ---------------------------------------

struct MonthRuns {
  Scenario scenario;
  ViabilityStudy distributed;
  ViabilityStudy centralized;
  double sweep_seconds = 0.0;
};

bool energy_dynamics_hold(const Scenario& sc, const ViabilityStudy& study, std::string& detail) {
  // The sweep rows don't carry the full dispatch, so re-solve one
  // representative point and check its trajectories in depth.
  double worst_recon = 0.0, worst_limit = 0.0, worst_simult = 0.0;
  const Index ns = static_cast<Index>(study.fleet.size());
  const Index N = sc.horizon.steps;
  std::vector<StorageSpec> fleet = study.fleet;
  StorageDynamics dyn = build_storage_dynamics(fleet, sc.horizon);
  const Index n_grid = static_cast<Index>(sc.generators.size());
  const double base_kw = sc.net.per_unit.power_base_va / 1000.0;

  MultiperiodCase c = sc.multiperiod_case(true);
  c.fleet = fleet;
  for (auto& s : c.fleet) s.sizing = true;
  BibcMatrix bibc = build_bibc(sc.net);
  std::vector<GeneratorSpec> gens_for_i0 = c.gens;
  for (const auto& s : c.fleet) {
    GeneratorSpec dis;
    dis.bus = s.bus;
    dis.p_max = s.p_rated;
    gens_for_i0.push_back(dis);
  }
  Vec p_max(static_cast<Index>(gens_for_i0.size()));
  for (std::size_t g = 0; g < gens_for_i0.size(); ++g) p_max[static_cast<Index>(g)] = gens_for_i0[g].p_max;
  SupportingCurrents scur = default_supporting_currents(bibc, generator_map(sc.net, gens_for_i0), p_max);
  LinearGridModel model = build_linear_model(sc.net, bibc, Vec::Constant(sc.net.bus_count(), sc.v_slack),
                                             scur.i0, scur.i1);
  std::vector<SizingResult> res = solve_sizing(sc.net, model, c, {100.0 * base_kw});
  if (res[0].status != LpStatus::Optimal) {
    detail = "representative sizing point did not solve";
    return false;
  }
  const MultiperiodSolution& d = res[0].dispatch;
  Vec u(2 * N * ns);
  for (Index k = 0; k < N; ++k) {
    for (Index s = 0; s < ns; ++s) {
      u[2 * ns * k + s] = d.p_gen(n_grid + 2 * s, k);
      u[2 * ns * k + ns + s] = d.p_gen(n_grid + 2 * s + 1, k);
    }
  }
  Mat e = reconstruct_energy(dyn, fleet, u);
  for (Index k = 0; k < N; ++k) {
    for (Index s = 0; s < ns; ++s) {
      worst_recon = std::max(worst_recon, std::abs(e(s, k) - d.energy(s, k)));
      worst_limit = std::max(worst_limit, std::max(-e(s, k), e(s, k) - d.z[s]));
      worst_simult = std::max(worst_simult,
                              std::min(d.p_gen(n_grid + 2 * s, k), -d.p_gen(n_grid + 2 * s + 1, k)));
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf), "recon err %.2e, limit excess %.2e, simultaneous %.2e", worst_recon,
                worst_limit, worst_simult);
  detail = buf;
  return worst_recon <= 1e-8 && worst_limit <= 1e-6 && worst_simult <= 1e-6;
}

MonthRuns run_month() {
  MonthRuns m;
  m.scenario = load_scenario(data_dir() / "scenario_cigre_month.json");
  std::vector<double> points;
  for (int i = 0; i < 20; ++i) points.push_back(25.0 + (300.0 - 25.0) * i / 19.0);
  SolverOptions opts;
  opts.tol_feas = 1e-8;
  opts.tol_gap = 1e-9;
  const auto t0 = std::chrono::steady_clock::now();
  m.distributed = run_viability_study(m.scenario, "distributed", points, opts);
  m.centralized = run_viability_study(m.scenario, "centralized", points, opts);
  m.sweep_seconds = seconds_since(t0);
  return m;
}

void criterion_7(const MonthRuns& m) {
  std::string detail;
  const bool ok = energy_dynamics_hold(m.scenario, m.distributed, detail);
  report(7, ok, "energy trajectories obey the stacked dynamics within bounds", detail);
}

void criterion_8(const MonthRuns& m) {
  bool mono_rev = true, mono_z = true, dominance = true, all_solved = true;
  for (std::size_t i = 0; i < m.distributed.rows.size(); ++i) {
    const SweepRow& d = m.distributed.rows[i];
    const SweepRow& c = m.centralized.rows[i];
    if (d.status != LpStatus::Optimal || c.status != LpStatus::Optimal) {
      all_solved = false;
      continue;
    }
    if (i > 0) {
      if (d.revenue > m.distributed.rows[i - 1].revenue + 1e-6) mono_rev = false;
      if (d.z_total > m.distributed.rows[i - 1].z_total + 1e-6) mono_z = false;
      if (c.revenue > m.centralized.rows[i - 1].revenue + 1e-6) mono_rev = false;
      if (c.z_total > m.centralized.rows[i - 1].z_total + 1e-6) mono_z = false;
    }
    if (d.revenue < c.revenue - 1e-6) dominance = false;
  }
  const double be_d = m.distributed.break_even_cost;
  const double be_c = m.centralized.break_even_cost;
  const bool be_order = std::isnan(be_c) || (!std::isnan(be_d) && be_d >= be_c);
  const bool runtime_ok = m.sweep_seconds < 1800.0;

  char detail[200];
  std::snprintf(detail, sizeof(detail),
                "monotone rev/z: %s/%s, distributed>=centralized: %s, break-even %.1f vs %.1f, %.0f s",
                mono_rev ? "yes" : "no", mono_z ? "yes" : "no", dominance ? "yes" : "no", be_d, be_c,
                m.sweep_seconds);
  report(8, all_solved && mono_rev && mono_z && dominance && be_order && runtime_ok,
         "cost sweeps are monotone and distributed storage dominates", detail);
}

void criterion_9(const MonthRuns& m) {
  SolverOptions opts;
  opts.tol_feas = 1e-8;
  opts.tol_gap = 1e-9;
  BenchReport bench = benchmark_runtime(m.scenario, {24, 96, 384, 744}, opts);
  bool solved = true;
  double t744 = 0.0;
  for (const auto& r : bench.rows) {
    if (r.status != LpStatus::Optimal) solved = false;
    if (r.steps == 744) t744 = r.assemble_seconds + r.solve_seconds;
  }
  char detail[160];
  std::snprintf(detail, sizeof(detail), "744-step sizing in %.1f s, log-log slope %.2f", t744,
                bench.loglog_slope);
  report(9, solved && t744 < 300.0 && bench.loglog_slope < 3.0,
         "month-long sizing solves in minutes with polynomial growth", detail);
}

void criterion_10(const MonthRuns& m) {
  // reduction: one-period multiperiod vs the single-period assembly
  Scenario opf = load_scenario(data_dir() / "scenario_cigre_opf.json");
  const std::vector<GeneratorSpec> gens = opf.generator_specs();
  const OperatingLimits limits = opf.limits();
  Vec p_d, q_d;
  opf.period_loads(0, p_d, q_d);
  BibcMatrix bibc = build_bibc(opf.net);
  Vec p_max(static_cast<Index>(gens.size()));
  for (std::size_t g = 0; g < gens.size(); ++g) p_max[static_cast<Index>(g)] = gens[g].p_max;
  SupportingCurrents scur = default_supporting_currents(bibc, generator_map(opf.net, gens), p_max);
  LinearGridModel model = build_linear_model(opf.net, bibc, Vec::Ones(opf.net.bus_count()), scur.i0,
                                             scur.i1);
  LpProblem single = assemble_single_period(opf.net, model, gens, limits, p_d, q_d, opf.v_slack);
  MultiperiodCase c;
  c.gens = gens;
  c.limits = limits;
  c.horizon = {1, 1.0};
  c.load_p = p_d;
  c.load_q = q_d;
  LpProblem multi = assemble_multiperiod(opf.net, model, c);
  LpSolution s1 = solve_lp(single);
  LpSolution s2 = solve_lp(multi);
  const bool reduction_ok = s1.status == LpStatus::Optimal && s2.status == LpStatus::Optimal &&
                            std::abs(s1.objective - s2.objective) <= 1e-9 * std::abs(s1.objective);

  // determinism: identical seeds reproduce identical numbers
  Scenario a = load_scenario(data_dir() / "scenario_cigre_month.json");
  Scenario b = load_scenario(data_dir() / "scenario_cigre_month.json");
  const bool hash_ok = a.hash() == b.hash() && a.hash() == m.scenario.hash();
  ConvergenceStudy c1 = run_convergence_study(opf, 1, 2);
  ConvergenceStudy c2 = run_convergence_study(opf, 1, 2);
  bool study_ok = c1.rows.size() == c2.rows.size();
  for (std::size_t i = 0; study_ok && i < c1.rows.size(); ++i) {
    study_ok = c1.rows[i].objective == c2.rows[i].objective &&
               c1.rows[i].voltage_mae == c2.rows[i].voltage_mae;
  }
  char detail[160];
  std::snprintf(detail, sizeof(detail), "reduction rel err %.2e, hashes equal: %s, reruns identical: %s",
                s1.status == LpStatus::Optimal && s2.status == LpStatus::Optimal
                    ? std::abs(s1.objective - s2.objective) / std::abs(s1.objective)
                    : 1.0,
                hash_ok ? "yes" : "no", study_ok ? "yes" : "no");
  report(10, reduction_ok && hash_ok && study_ok,
         "one-period reduction matches and identical seeds reproduce results", detail);
}

}  // namespace

int main() {
  std::printf("acceptance suite\n================\n");
  criterion_1();
  criterion_2();
  criteria_3_4_5();
  criterion_6();
  MonthRuns m = run_month();
  criterion_7(m);
  criterion_8(m);
  criterion_9(m);
  criterion_10(m);
  std::printf("================\n%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
