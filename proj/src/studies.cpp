#include "fbsopf/studies.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace fbsopf {

ConvergenceStudy run_convergence_study(const Scenario& scenario, int h_min, int h_max) {
  if (h_min < 1 || h_max < h_min) throw InputError("need 1 <= h_min <= h_max");
  if (scenario.horizon.steps != 1) {
    throw InputError("the convergence study runs on a single-period scenario");
  }
  ConvergenceStudy study;
  study.scenario_hash = scenario.hash();

  const std::vector<GeneratorSpec> gens = scenario.generator_specs();
  const OperatingLimits limits = scenario.limits();
  Vec p_d, q_d;
  scenario.period_loads(0, p_d, q_d);

  for (int h = h_min; h <= h_max; ++h) {
    DispatchSolution dispatch = run_fbs_opf(scenario.net, gens, limits, p_d, q_d, scenario.v_slack,
                                            /*epsilon=*/0.0, /*h_max=*/h);
    ProjectionReport proj = project_dispatch(scenario.net, gens, limits, p_d, q_d, scenario.v_slack, dispatch);
    ConvergenceRow row;
    row.h = h;
    row.voltage_mae = proj.voltage_mae;
    row.objective = dispatch.objective;
    row.sweep_mae = dispatch.final_voltage_mae;
    row.violations = static_cast<int>(proj.violations.size());
    study.rows.push_back(row);
  }
  return study;
}

namespace {

const std::vector<StorageSpec>& pick_fleet(const Scenario& scenario, const std::string& config) {
  if (config.empty()) return scenario.storages;
  auto it = scenario.storage_configs.find(config);
  if (it == scenario.storage_configs.end()) {
    throw InputError("scenario has no storage config named '" + config + "'");
  }
  return it->second;
}

LinearGridModel scenario_linear_model(const Scenario& scenario, const MultiperiodCase& c) {
  const BibcMatrix bibc = build_bibc(scenario.net);
  std::vector<GeneratorSpec> gens = c.gens;
  for (const auto& s : c.fleet) {
    GeneratorSpec dis;
    dis.bus = s.bus;
    dis.p_max = s.p_rated;
    gens.push_back(dis);
  }
  Vec p_max(static_cast<Index>(gens.size()));
  for (std::size_t g = 0; g < gens.size(); ++g) p_max[static_cast<Index>(g)] = gens[g].p_max;
  const Mat cg = generator_map(scenario.net, gens);
  const SupportingCurrents sc = default_supporting_currents(bibc, cg, p_max);
  const Vec vmag = Vec::Constant(scenario.net.bus_count(), scenario.v_slack);
  return build_linear_model(scenario.net, bibc, vmag, sc.i0, sc.i1);
}

}  // namespace

ViabilityStudy run_viability_study(const Scenario& scenario, const std::string& config,
                                   const std::vector<double>& cost_points, const SolverOptions& options) {
  ViabilityStudy study;
  study.config = config.empty() ? "active" : config;
  study.scenario_hash = scenario.hash();
  study.seed = scenario.seed;
  study.fleet = pick_fleet(scenario, config);
  const double base_kw = scenario.net.per_unit.power_base_va / 1000.0;

  // Baseline without storage.
  MultiperiodCase base_case = scenario.multiperiod_case(/*sizing=*/false);
  base_case.fleet.clear();
  LinearGridModel base_model = scenario_linear_model(scenario, base_case);
  LpProblem base_lp = assemble_multiperiod(scenario.net, base_model, base_case);
  LpSolution base_sol = solve_lp(base_lp, options);
  if (base_sol.status != LpStatus::Optimal) {
    throw OpfError(std::string("baseline multiperiod solve ") + lp_status_name(base_sol.status),
                   base_sol.status);
  }
  study.baseline_operational = base_sol.objective;

  // Sizing sweep with the requested fleet.
  MultiperiodCase size_case = scenario.multiperiod_case(/*sizing=*/true);
  size_case.fleet = study.fleet;
  for (auto& s : size_case.fleet) s.sizing = true;
  LinearGridModel model = scenario_linear_model(scenario, size_case);
  std::vector<double> points_pu;  // capacity costs arrive per kWh; scale to the power base
  points_pu.reserve(cost_points.size());
  for (double cp : cost_points) points_pu.push_back(cp * base_kw);
  std::vector<StorageSpec> fleet_for_solve = size_case.fleet;
  MultiperiodCase solve_case = size_case;
  std::vector<SizingResult> results = solve_sizing(scenario.net, model, solve_case, points_pu, options);

  for (std::size_t i = 0; i < results.size(); ++i) {
    const SizingResult& r = results[i];
    SweepRow row;
    row.cost_point = cost_points[i];
    row.status = r.status;
    row.seconds = r.solve_seconds;
    row.iterations = r.iterations;
    if (r.status == LpStatus::Optimal) {
      row.z = r.z;
      row.z_total = r.z.sum();
      row.objective = r.objective;
      row.operational = r.operational_cost;
      row.storage_cost = r.storage_cost;
      const Revenue rev = compute_revenue(r, study.baseline_operational);
      row.revenue = rev.revenue;
      row.profit = rev.profit;
    } else {
      row.z = Vec::Zero(static_cast<Index>(study.fleet.size()));
    }
    study.rows.push_back(std::move(row));
  }

  const double profit_tol = 1e-7 * std::max(1.0, std::abs(study.baseline_operational));
  for (const SweepRow& row : study.rows) {
    if (row.status == LpStatus::Optimal && row.profit > profit_tol) {
      if (std::isnan(study.break_even_cost) || row.cost_point > study.break_even_cost) {
        study.break_even_cost = row.cost_point;
      }
    }
  }
  return study;
}

Scenario truncate_scenario(const Scenario& scenario, Index steps) {
  if (steps < 1 || steps > scenario.horizon.steps) throw InputError("truncation length out of range");
  Scenario out = scenario;
  out.horizon.steps = steps;
  out.load_p = scenario.load_p.leftCols(steps);
  out.load_q = scenario.load_q.leftCols(steps);
  out.pv_availability = scenario.pv_availability.leftCols(steps);
  out.price = scenario.price.head(steps);
  return out;
}

BenchReport benchmark_runtime(const Scenario& scenario, const std::vector<Index>& horizon_lengths,
                              const SolverOptions& options) {
  BenchReport report;
  for (Index steps : horizon_lengths) {
    Scenario sub = truncate_scenario(scenario, steps);
    MultiperiodCase c = sub.multiperiod_case(/*sizing=*/true);
    for (auto& s : c.fleet) s.sizing = true;
    LinearGridModel model = scenario_linear_model(sub, c);

    BenchRow row;
    row.steps = steps;
    const auto t0 = std::chrono::steady_clock::now();
    LpProblem lp = assemble_multiperiod(sub.net, model, c);
    const auto t1 = std::chrono::steady_clock::now();
    LpSolution sol = solve_lp(lp, options);
    const auto t2 = std::chrono::steady_clock::now();
    row.assemble_seconds = std::chrono::duration<double>(t1 - t0).count();
    row.solve_seconds = std::chrono::duration<double>(t2 - t1).count();
    row.variables = lp.num_vars();
    row.rows = lp.num_eq() + lp.num_ineq();
    row.status = sol.status;
    report.rows.push_back(row);
  }

  // least-squares slope of log(total time) vs log(steps)
  if (report.rows.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(report.rows.size());
    for (const auto& r : report.rows) {
      const double x = std::log(static_cast<double>(r.steps));
      const double y = std::log(std::max(1e-9, r.assemble_seconds + r.solve_seconds));
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    report.loglog_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }
  return report;
}

void write_convergence_csv(const std::filesystem::path& path, const ConvergenceStudy& study) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "# scenario_hash: " << study.scenario_hash << "\n";
  out << "h,voltage_mae_pu,objective,sweep_mae_pu,violations\n";
  out.precision(12);
  for (const auto& r : study.rows) {
    out << r.h << "," << r.voltage_mae << "," << r.objective << "," << r.sweep_mae << ","
        << r.violations << "\n";
  }
}

void write_viability_csv(const std::filesystem::path& path, const ViabilityStudy& study) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "# config: " << study.config << "\n";
  out << "# scenario_hash: " << study.scenario_hash << "\n";
  out << "# seed: " << study.seed << "\n";
  out << "# baseline_operational: " << study.baseline_operational << "\n";
  out << "# break_even_cost: " << study.break_even_cost << "\n";
  out << "cost_eur_per_kwh,status,z_total_puh,revenue,profit,objective,operational,storage_cost,seconds,iterations";
  for (const auto& s : study.fleet) out << ",z_" << s.name;
  out << "\n";
  out.precision(12);
  for (const auto& r : study.rows) {
    out << r.cost_point << "," << lp_status_name(r.status) << "," << r.z_total << "," << r.revenue
        << "," << r.profit << "," << r.objective << "," << r.operational << "," << r.storage_cost
        << "," << r.seconds << "," << r.iterations;
    for (Index s = 0; s < r.z.size(); ++s) out << "," << r.z[s];
    out << "\n";
  }
}

void write_bench_csv(const std::filesystem::path& path, const BenchReport& report,
                     std::uint64_t scenario_hash) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "# scenario_hash: " << scenario_hash << "\n";
  out << "# loglog_slope: " << report.loglog_slope << "\n";
  out << "steps,variables,rows,assemble_seconds,solve_seconds,status\n";
  out.precision(12);
  for (const auto& r : report.rows) {
    out << r.steps << "," << r.variables << "," << r.rows << "," << r.assemble_seconds << ","
        << r.solve_seconds << "," << lp_status_name(r.status) << "\n";
  }
}

void write_manifest(const std::filesystem::path& path, const Scenario& scenario,
                    const std::map<std::string, std::string>& extra) {
  nlohmann::json j;
  j["scenario"] = scenario.name;
  j["scenario_hash"] = scenario.hash();
  j["seed"] = scenario.seed;
  j["steps"] = scenario.horizon.steps;
  j["step_hours"] = scenario.horizon.step_hours;
  j["tool"] = "fbsopf";
  j["version"] = "0.1.0";
  for (const auto& [k, v] : extra) j[k] = v;
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace fbsopf
