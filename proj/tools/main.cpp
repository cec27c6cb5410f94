// fbsopf command line: validation, load flow, single- and multiperiod OPF,
// storage sizing sweeps and the supporting studies on scenario files.
//
// Exit codes: 0 success, 2 validation failure, 3 infeasible, 4 solver failure.

#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "fbsopf/studies.hpp"

namespace fs = std::filesystem;
using namespace fbsopf;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitSolver = 4;

struct CommonArgs {
  std::string scenario_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  double epsilon = 1e-4;
  int h_max = 4;
  bool terminal_soc = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_scenario = true) {
  auto* opt = cmd->add_option("--scenario", args.scenario_path, "scenario file (JSON)");
  if (needs_scenario) opt->required();
  cmd->add_option("--out", args.out_dir, "directory for CSV reports and the run manifest");
  cmd->add_option("--seed", args.seed, "override the synthetic-profile seed");
  cmd->add_option("--epsilon", args.epsilon, "sweep convergence threshold (pu)");
  cmd->add_option("--h-max", args.h_max, "maximum sweep iterations");
  cmd->add_flag("--terminal-soc", args.terminal_soc, "require end-of-horizon energy >= initial energy");
}

Scenario load(const CommonArgs& args) {
  Scenario sc = load_scenario(args.scenario_path, args.seed);
  if (args.terminal_soc) sc.terminal_soc = true;
  return sc;
}

fs::path ensure_out(const CommonArgs& args) {
  fs::path dir(args.out_dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<double> parse_cost_points(const std::string& spec) {
  // "lo:hi:count" or a comma-separated list
  std::vector<double> pts;
  if (spec.find(':') != std::string::npos) {
    double lo, hi;
    int count;
    if (std::sscanf(spec.c_str(), "%lf:%lf:%d", &lo, &hi, &count) != 3 || count < 1) {
      throw InputError("cost points must be lo:hi:count or a comma list");
    }
    for (int i = 0; i < count; ++i) {
      pts.push_back(count == 1 ? lo : lo + (hi - lo) * i / (count - 1));
    }
  } else {
    std::stringstream ss(spec);
    std::string cell;
    while (std::getline(ss, cell, ',')) pts.push_back(std::stod(cell));
  }
  if (pts.empty()) throw InputError("no cost points given");
  return pts;
}

int cmd_validate(const CommonArgs& args) {
  Scenario sc = load(args);
  ValidationReport report = validate_network(sc.net);
  std::cout << "scenario: " << sc.name << "\n"
            << "grid: " << sc.net.name << " (" << sc.net.bus_count() << " buses, "
            << sc.net.branch_count() << " branches)\n"
            << "generators: " << sc.generators.size() << ", storages: " << sc.storages.size() << "\n"
            << "horizon: " << sc.horizon.steps << " x " << sc.horizon.step_hours << " h\n"
            << "scenario hash: " << sc.hash() << "\n"
            << "validation: " << (report.ok() ? "ok" : "FAILED") << "\n";
  for (const auto& v : report.violations) std::cout << "  - " << v << "\n";
  return report.ok() ? kExitOk : kExitValidation;
}

int cmd_powerflow(const CommonArgs& args, int period) {
  Scenario sc = load(args);
  const BibcMatrix bibc = build_bibc(sc.net);
  InjectionSet inj;
  Vec p_d, q_d;
  sc.period_loads(period, p_d, q_d);
  inj.p = -p_d;
  inj.q = -q_d;
  PowerFlowResult res = solve_power_flow(sc.net, bibc, inj, Complex(sc.v_slack, 0.0));
  std::cout << "converged in " << res.iterations << " sweeps, total loss " << res.total_loss
            << " pu (" << res.total_loss * sc.net.per_unit.power_base_va / 1000.0 << " kW)\n";
  std::cout << "slack injection: " << res.slack_injection.real() << " + j" << res.slack_injection.imag()
            << " pu\n\nbus  |v| (pu)   angle (deg)\n";
  for (Index j = 0; j < sc.net.bus_count(); ++j) {
    std::printf("%-4s %-10.6f %+.4f\n", sc.net.buses[j].label.c_str(), std::abs(res.state.v[j]),
                std::arg(res.state.v[j]) * 180.0 / M_PI);
  }
  std::cout << "\nbranch        current (pu)  loss (pu)\n";
  for (Index b = 0; b < sc.net.branch_count(); ++b) {
    std::printf("%-13s %-13.6f %.3e\n", sc.net.branches[b].name.c_str(),
                std::abs(res.branch_currents[b]), res.branch_loss[b]);
  }
  return kExitOk;
}

int cmd_linearize(const CommonArgs& args, bool dump) {
  Scenario sc = load(args);
  const BibcMatrix bibc = build_bibc(sc.net);
  MultiperiodCase c = sc.multiperiod_case(!sc.storages.empty() &&
                                          std::any_of(sc.storages.begin(), sc.storages.end(),
                                                      [](const StorageSpec& s) { return s.sizing; }));
  std::vector<GeneratorSpec> gens = sc.generator_specs();
  Vec p_max(static_cast<Index>(gens.size()));
  for (std::size_t g = 0; g < gens.size(); ++g) p_max[static_cast<Index>(g)] = gens[g].p_max;
  const Mat cg = generator_map(sc.net, gens);
  const SupportingCurrents scur = default_supporting_currents(bibc, cg, p_max);
  const Vec vmag = Vec::Constant(sc.net.bus_count(), sc.v_slack);
  LinearGridModel model = build_linear_model(sc.net, bibc, vmag, scur.i0, scur.i1);
  std::cout << "linear model at |v| = " << sc.v_slack << " pu\n";
  if (dump) {
    Eigen::IOFormat fmt(6, 0, ", ", "\n", "  [", "]");
    std::cout << "B_v (" << model.B_v.rows() << "x" << model.B_v.cols() << "):\n" << model.B_v.format(fmt) << "\n";
    std::cout << "B_r:\n" << model.B_r.format(fmt) << "\n";
    std::cout << "L0:\n" << model.L0.format(fmt) << "\n";
    std::cout << "L1:\n" << model.L1.format(fmt) << "\n";
    std::cout << "b: " << model.b.transpose().format(fmt) << "\n";
    std::cout << "i0: " << model.i0.transpose().format(fmt) << "\n";
    std::cout << "i1: " << model.i1.transpose().format(fmt) << "\n";
  } else {
    std::cout << "(use --dump to print the matrices)\n";
  }
  return kExitOk;
}

int cmd_opf(const CommonArgs& args, int period) {
  Scenario sc = load(args);
  const std::vector<GeneratorSpec> gens = sc.generator_specs();
  const OperatingLimits limits = sc.limits();
  Vec p_d, q_d;
  sc.period_loads(period, p_d, q_d);
  DispatchSolution d = run_fbs_opf(sc.net, gens, limits, p_d, q_d, sc.v_slack, args.epsilon, args.h_max);
  ProjectionReport proj = project_dispatch(sc.net, gens, limits, p_d, q_d, sc.v_slack, d);

  std::cout << "objective J = " << d.objective << " after h = " << d.iterations
            << " iterations (voltage change " << d.final_voltage_mae << " pu)\n";
  std::cout << "projection: voltage MAE " << proj.voltage_mae << " pu, exact loss "
            << proj.flow.total_loss << " pu, violations " << proj.violations.size() << "\n\n";
  std::cout << "generator     p (pu)      q (pu)\n";
  for (std::size_t g = 0; g < gens.size(); ++g) {
    std::printf("%-13s %+.6f  %+.6f\n", gens[g].name.c_str(), d.p_gen[static_cast<Index>(g)],
                d.q_gen[static_cast<Index>(g)]);
  }
  for (const auto& v : proj.violations) {
    std::cout << "violation: " << v.what << " " << v.entity << " at " << v.value << " (limit " << v.limit
              << ")\n";
  }
  if (!args.out_dir.empty()) {
    const fs::path dir = ensure_out(args);
    write_manifest(dir / "manifest.json", sc, {{"command", "opf"}});
  }
  return kExitOk;
}

int cmd_mpopf(const CommonArgs& args) {
  Scenario sc = load(args);
  MultiperiodCase c = sc.multiperiod_case(/*sizing=*/false);
  const BibcMatrix bibc = build_bibc(sc.net);
  (void)bibc;
  LpProblem lp;
  MultiperiodSolution sol;
  {
    // one voltage state for the whole horizon
    std::vector<GeneratorSpec> gens = c.gens;
    for (const auto& s : c.fleet) {
      GeneratorSpec dis;
      dis.bus = s.bus;
      dis.p_max = s.p_rated;
      gens.push_back(dis);
    }
    Vec p_max(static_cast<Index>(gens.size()));
    for (std::size_t g = 0; g < gens.size(); ++g) p_max[static_cast<Index>(g)] = gens[g].p_max;
    const BibcMatrix bb = build_bibc(sc.net);
    const Mat cg = generator_map(sc.net, gens);
    const SupportingCurrents scur = default_supporting_currents(bb, cg, p_max);
    const Vec vmag = Vec::Constant(sc.net.bus_count(), sc.v_slack);
    LinearGridModel model = build_linear_model(sc.net, bb, vmag, scur.i0, scur.i1);
    lp = assemble_multiperiod(sc.net, model, c);
    LpSolution s = solve_lp(lp);
    if (s.status != LpStatus::Optimal) {
      std::cerr << "multiperiod solve " << lp_status_name(s.status) << "\n";
      return s.status == LpStatus::Infeasible ? kExitInfeasible : kExitSolver;
    }
    sol = decode_multiperiod(lp, s, multiperiod_layout(sc.net, c), c);
  }
  std::cout << "objective J = " << sol.objective << " over " << sc.horizon.steps << " steps ("
            << sol.iterations << " solver iterations)\n";
  std::cout << "feeder energy: " << sol.p_gen.row(0).sum() * sc.horizon.step_hours << " pu*h\n";
  if (!args.out_dir.empty()) {
    const fs::path dir = ensure_out(args);
    std::vector<std::string> labels;
    for (const auto& g : c.gens) labels.push_back(g.name);
    for (const auto& s : c.fleet) {
      labels.push_back(s.name + ".dis");
      labels.push_back(s.name + ".ch");
    }
    write_series_csv(dir / "dispatch_p.csv", labels, sol.p_gen.transpose(),
                     {"active generator power per period (pu)"});
    write_manifest(dir / "manifest.json", sc, {{"command", "mpopf"}});
    std::cout << "wrote " << (dir / "dispatch_p.csv") << "\n";
  }
  return kExitOk;
}

int cmd_size(const CommonArgs& args, const std::string& config, double cost) {
  Scenario sc = load(args);
  ViabilityStudy study = run_viability_study(sc, config, {cost});
  const SweepRow& row = study.rows.at(0);
  if (row.status != LpStatus::Optimal) {
    std::cerr << "sizing solve " << lp_status_name(row.status) << "\n";
    return row.status == LpStatus::Infeasible ? kExitInfeasible : kExitSolver;
  }
  const double base_kw = sc.net.per_unit.power_base_va / 1000.0;
  std::cout << "config " << study.config << ", capacity cost " << cost << " per kWh\n"
            << "objective " << row.objective << ", operational " << row.operational << ", investment "
            << row.storage_cost << "\n"
            << "revenue " << row.revenue << ", profit " << row.profit << "\n"
            << "total capacity " << row.z_total << " pu*h (" << row.z_total * base_kw << " kWh)\n\n"
            << "bus   capacity (kWh)\n";
  for (std::size_t s = 0; s < study.fleet.size(); ++s) {
    std::printf("%-5s %.3f\n", sc.net.buses[study.fleet[s].bus].label.c_str(),
                row.z[static_cast<Index>(s)] * base_kw);
  }
  if (!args.out_dir.empty()) {
    const fs::path dir = ensure_out(args);
    write_viability_csv(dir / "sizing.csv", study);
    write_manifest(dir / "manifest.json", sc, {{"command", "size"}, {"config", study.config}});
  }
  return kExitOk;
}

int cmd_sweep(const CommonArgs& args, const std::string& config, const std::string& points_spec) {
  Scenario sc = load(args);
  const std::vector<double> points = parse_cost_points(points_spec);
  ViabilityStudy study = run_viability_study(sc, config, points);
  std::cout << "config " << study.config << ", baseline operational " << study.baseline_operational
            << "\n";
  std::cout << "cost  status      z_total(puh)  revenue     profit\n";
  for (const auto& r : study.rows) {
    std::printf("%-5.5g %-11s %-13.6f %-11.5g %-11.5g\n", r.cost_point, lp_status_name(r.status),
                r.z_total, r.revenue, r.profit);
  }
  if (std::isnan(study.break_even_cost)) {
    std::cout << "no profitable cost point in the sweep\n";
  } else {
    std::cout << "break-even cost: " << study.break_even_cost << " per kWh\n";
  }
  if (!args.out_dir.empty()) {
    const fs::path dir = ensure_out(args);
    write_viability_csv(dir / ("sweep_" + study.config + ".csv"), study);
    write_manifest(dir / "manifest.json", sc, {{"command", "sweep"}, {"config", study.config}});
    std::cout << "wrote " << (dir / ("sweep_" + study.config + ".csv")) << "\n";
  }
  return kExitOk;
}

int cmd_convergence(const CommonArgs& args) {
  Scenario sc = load(args);
  ConvergenceStudy study = run_convergence_study(sc, 1, args.h_max);
  std::cout << "h   voltage MAE (pu)  objective      sweep change (pu)  violations\n";
  for (const auto& r : study.rows) {
    std::printf("%-3d %-17.6e %-14.6f %-18.6e %d\n", r.h, r.voltage_mae, r.objective, r.sweep_mae,
                r.violations);
  }
  if (!args.out_dir.empty()) {
    const fs::path dir = ensure_out(args);
    write_convergence_csv(dir / "convergence.csv", study);
    write_manifest(dir / "manifest.json", sc, {{"command", "convergence-study"}});
  }
  return kExitOk;
}

int cmd_bench(const CommonArgs& args, const std::string& horizons_spec) {
  Scenario sc = load(args);
  std::vector<Index> horizons;
  std::stringstream ss(horizons_spec);
  std::string cell;
  while (std::getline(ss, cell, ',')) horizons.push_back(static_cast<Index>(std::stol(cell)));
  BenchReport report = benchmark_runtime(sc, horizons);
  std::cout << "steps  vars     rows     assemble(s)  solve(s)  status\n";
  for (const auto& r : report.rows) {
    std::printf("%-6d %-8d %-8d %-12.3f %-9.3f %s\n", r.steps, r.variables, r.rows, r.assemble_seconds,
                r.solve_seconds, lp_status_name(r.status));
  }
  std::cout << "log-log runtime slope: " << report.loglog_slope << "\n";
  if (!args.out_dir.empty()) {
    const fs::path dir = ensure_out(args);
    write_bench_csv(dir / "bench.csv", report, sc.hash());
    write_manifest(dir / "manifest.json", sc, {{"command", "bench"}});
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"linear OPF, storage sizing and placement for radial LV grids"};
  app.require_subcommand(1);

  CommonArgs args;
  int period = 0;
  bool dump = false;
  std::string config;
  double cost = 150.0;
  std::string points_spec = "25:300:20";
  std::string horizons_spec = "24,96,384,744";

  auto* v = app.add_subcommand("validate", "validate a scenario and its grid");
  add_common(v, args);
  auto* pf = app.add_subcommand("powerflow", "exact load flow at one period (no dispatch)");
  add_common(pf, args);
  pf->add_option("--period", period, "period index");
  auto* lin = app.add_subcommand("linearize", "build the linear grid model");
  add_common(lin, args);
  lin->add_flag("--dump", dump, "print the model matrices");
  auto* opf = app.add_subcommand("opf", "single-period iterative OPF");
  add_common(opf, args);
  opf->add_option("--period", period, "period index");
  auto* mp = app.add_subcommand("mpopf", "multiperiod OPF with fixed storage limits");
  add_common(mp, args);
  auto* sz = app.add_subcommand("size", "optimal storage sizing at one capacity cost");
  add_common(sz, args);
  sz->add_option("--config", config, "storage config name (default: active fleet)");
  sz->add_option("--cost", cost, "capacity cost per kWh");
  auto* sw = app.add_subcommand("sweep", "viability study over a capacity-cost sweep");
  add_common(sw, args);
  sw->add_option("--config", config, "storage config name (default: active fleet)");
  sw->add_option("--cost-points", points_spec, "lo:hi:count or comma list, per kWh");
  auto* conv = app.add_subcommand("convergence-study", "voltage/objective error vs sweep iterations");
  add_common(conv, args);
  auto* bench = app.add_subcommand("bench", "sizing runtime vs horizon length");
  add_common(bench, args);
  bench->add_option("--horizons", horizons_spec, "comma list of step counts");

  CLI11_PARSE(app, argc, argv);

  try {
    if (v->parsed()) return cmd_validate(args);
    if (pf->parsed()) return cmd_powerflow(args, period);
    if (lin->parsed()) return cmd_linearize(args, dump);
    if (opf->parsed()) return cmd_opf(args, period);
    if (mp->parsed()) return cmd_mpopf(args);
    if (sz->parsed()) return cmd_size(args, config, cost);
    if (sw->parsed()) return cmd_sweep(args, config, points_spec);
    if (conv->parsed()) return cmd_convergence(args);
    if (bench->parsed()) return cmd_bench(args, horizons_spec);
  } catch (const OpfError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.status() == LpStatus::Infeasible ? kExitInfeasible : kExitSolver;
  } catch (const PowerFlowError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  }
  return kExitOk;
}
