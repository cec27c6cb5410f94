// Python bindings for the core operations: network model, exact load flow,
// linearization, the iterative OPF, multiperiod storage sizing and the
// synthetic profile generator.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fbsopf/studies.hpp"

namespace py = pybind11;
using namespace fbsopf;

namespace {

LinearGridModel model_for(const Scenario& sc, const std::vector<StorageSpec>& fleet) {
  BibcMatrix bibc = build_bibc(sc.net);
  std::vector<GeneratorSpec> gens = sc.generator_specs();
  for (const auto& s : fleet) {
    GeneratorSpec dis;
    dis.bus = s.bus;
    dis.p_max = s.p_rated;
    gens.push_back(dis);
  }
  Vec p_max(static_cast<Index>(gens.size()));
  for (std::size_t g = 0; g < gens.size(); ++g) p_max[static_cast<Index>(g)] = gens[g].p_max;
  SupportingCurrents sc0 = default_supporting_currents(bibc, generator_map(sc.net, gens), p_max);
  return build_linear_model(sc.net, bibc, Vec::Constant(sc.net.bus_count(), sc.v_slack), sc0.i0, sc0.i1);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "linear OPF and storage sizing for radial low-voltage grids";

  py::register_exception<InputError>(m, "InputError");
  py::register_exception<PowerFlowError>(m, "PowerFlowError");
  py::register_exception<OpfError>(m, "OpfError");

  py::enum_<BusKind>(m, "BusKind")
      .value("SLACK", BusKind::Slack)
      .value("LOAD", BusKind::Load)
      .value("GENERATOR", BusKind::Generator);

  py::class_<Bus>(m, "Bus")
      .def_readonly("id", &Bus::id)
      .def_readonly("kind", &Bus::kind)
      .def_readonly("label", &Bus::label)
      .def_readonly("base_voltage_v", &Bus::base_voltage_v);

  py::class_<Branch>(m, "Branch")
      .def_readonly("from_bus", &Branch::from_bus)
      .def_readonly("to_bus", &Branch::to_bus)
      .def_readonly("resistance_pu", &Branch::resistance_pu)
      .def_readonly("reactance_pu", &Branch::reactance_pu)
      .def_readonly("current_limit_pu", &Branch::current_limit_pu)
      .def_readonly("name", &Branch::name);

  py::class_<PerUnitBase>(m, "PerUnitBase")
      .def_readonly("power_base_va", &PerUnitBase::power_base_va)
      .def_readonly("voltage_base_v", &PerUnitBase::voltage_base_v)
      .def("impedance_base_ohm", &PerUnitBase::impedance_base_ohm)
      .def("current_base_a", &PerUnitBase::current_base_a)
      .def("power_to_pu", &PerUnitBase::power_to_pu)
      .def("power_from_pu", &PerUnitBase::power_from_pu);

  py::class_<RadialNetwork>(m, "RadialNetwork")
      .def_readonly("buses", &RadialNetwork::buses)
      .def_readonly("branches", &RadialNetwork::branches)
      .def_readonly("per_unit", &RadialNetwork::per_unit)
      .def_readonly("name", &RadialNetwork::name)
      .def("bus_count", &RadialNetwork::bus_count)
      .def("branch_count", &RadialNetwork::branch_count)
      .def("bus_by_label", &RadialNetwork::bus_by_label);

  py::class_<ValidationReport>(m, "ValidationReport")
      .def_readonly("violations", &ValidationReport::violations)
      .def("ok", &ValidationReport::ok);

  py::class_<BibcMatrix>(m, "BibcMatrix")
      .def_readonly("full", &BibcMatrix::full)
      .def_readonly("reduced", &BibcMatrix::reduced);

  m.def("load_grid", &load_grid, py::arg("path"));
  m.def("validate_network", &validate_network, py::arg("net"));
  m.def("build_bibc", &build_bibc, py::arg("net"));

  py::class_<PowerFlowResult>(m, "PowerFlowResult")
      .def_property_readonly("voltages", [](const PowerFlowResult& r) { return r.state.v; })
      .def_readonly("branch_currents", &PowerFlowResult::branch_currents)
      .def_readonly("branch_loss", &PowerFlowResult::branch_loss)
      .def_readonly("total_loss", &PowerFlowResult::total_loss)
      .def_readonly("iterations", &PowerFlowResult::iterations)
      .def_property_readonly("slack_injection", [](const PowerFlowResult& r) {
        return std::make_pair(r.slack_injection.real(), r.slack_injection.imag());
      });

  m.def(
      "solve_power_flow",
      [](const RadialNetwork& net, const Vec& p, const Vec& q, double v_slack, double tol, int max_iter) {
        BibcMatrix bibc = build_bibc(net);
        InjectionSet inj{p, q};
        return solve_power_flow(net, bibc, inj, Complex(v_slack, 0.0), tol, max_iter);
      },
      py::arg("net"), py::arg("p"), py::arg("q"), py::arg("v_slack") = 1.0, py::arg("tol") = 1e-8,
      py::arg("max_iter") = 50);

  py::class_<LinearGridModel>(m, "LinearGridModel")
      .def_readonly("B_v", &LinearGridModel::B_v)
      .def_readonly("B_r", &LinearGridModel::B_r)
      .def_readonly("L0", &LinearGridModel::L0)
      .def_readonly("L1", &LinearGridModel::L1)
      .def_readonly("b", &LinearGridModel::b)
      .def_readonly("i0", &LinearGridModel::i0)
      .def_readonly("i1", &LinearGridModel::i1);

  m.def("pwl_loss_eval", &pwl_loss_eval, py::arg("model"), py::arg("injections"));

  py::class_<Scenario>(m, "Scenario")
      .def_readonly("name", &Scenario::name)
      .def_readonly("net", &Scenario::net)
      .def_readonly("horizon_steps", &Scenario::horizon, py::return_value_policy::copy)
      .def_property_readonly("steps", [](const Scenario& s) { return s.horizon.steps; })
      .def_readonly("load_p", &Scenario::load_p)
      .def_readonly("load_q", &Scenario::load_q)
      .def_readonly("pv_availability", &Scenario::pv_availability)
      .def_readonly("price", &Scenario::price)
      .def_readonly("seed", &Scenario::seed)
      .def("hash", &Scenario::hash)
      .def("linear_model", [](const Scenario& s) { return model_for(s, s.storages); });

  m.def(
      "load_scenario",
      [](const std::filesystem::path& path, std::optional<std::uint64_t> seed) {
        return load_scenario(path, seed);
      },
      py::arg("path"), py::arg("seed") = py::none());

  py::class_<DispatchSolution>(m, "DispatchSolution")
      .def_readonly("p_gen", &DispatchSolution::p_gen)
      .def_readonly("q_gen", &DispatchSolution::q_gen)
      .def_readonly("loss_p", &DispatchSolution::loss_p)
      .def_readonly("loss_q", &DispatchSolution::loss_q)
      .def_readonly("v", &DispatchSolution::v)
      .def_readonly("objective", &DispatchSolution::objective)
      .def_readonly("iterations", &DispatchSolution::iterations)
      .def_readonly("final_voltage_mae", &DispatchSolution::final_voltage_mae);

  m.def(
      "run_opf",
      [](const Scenario& sc, int period, double epsilon, int h_max) {
        Vec p_d, q_d;
        sc.period_loads(period, p_d, q_d);
        return run_fbs_opf(sc.net, sc.generator_specs(), sc.limits(), p_d, q_d, sc.v_slack, epsilon, h_max);
      },
      py::arg("scenario"), py::arg("period") = 0, py::arg("epsilon") = 1e-4, py::arg("h_max") = 4);

  py::class_<LimitViolation>(m, "LimitViolation")
      .def_readonly("what", &LimitViolation::what)
      .def_readonly("entity", &LimitViolation::entity)
      .def_readonly("value", &LimitViolation::value)
      .def_readonly("limit", &LimitViolation::limit);

  py::class_<ProjectionReport>(m, "ProjectionReport")
      .def_readonly("violations", &ProjectionReport::violations)
      .def_readonly("voltage_mae", &ProjectionReport::voltage_mae)
      .def_property_readonly("exact_voltages",
                             [](const ProjectionReport& r) { return r.flow.state.v; })
      .def_property_readonly("total_loss", [](const ProjectionReport& r) { return r.flow.total_loss; });

  m.def(
      "project_dispatch",
      [](const Scenario& sc, const DispatchSolution& d, int period) {
        Vec p_d, q_d;
        sc.period_loads(period, p_d, q_d);
        return project_dispatch(sc.net, sc.generator_specs(), sc.limits(), p_d, q_d, sc.v_slack, d);
      },
      py::arg("scenario"), py::arg("dispatch"), py::arg("period") = 0);

  py::class_<SweepRow>(m, "SweepRow")
      .def_readonly("cost_point", &SweepRow::cost_point)
      .def_readonly("z_total", &SweepRow::z_total)
      .def_readonly("revenue", &SweepRow::revenue)
      .def_readonly("profit", &SweepRow::profit)
      .def_readonly("objective", &SweepRow::objective)
      .def_readonly("operational", &SweepRow::operational)
      .def_readonly("z", &SweepRow::z)
      .def_property_readonly("status", [](const SweepRow& r) { return lp_status_name(r.status); });

  py::class_<ViabilityStudy>(m, "ViabilityStudy")
      .def_readonly("config", &ViabilityStudy::config)
      .def_readonly("baseline_operational", &ViabilityStudy::baseline_operational)
      .def_readonly("rows", &ViabilityStudy::rows)
      .def_readonly("break_even_cost", &ViabilityStudy::break_even_cost)
      .def_readonly("scenario_hash", &ViabilityStudy::scenario_hash);

  m.def(
      "run_viability_study",
      [](const Scenario& sc, const std::string& config, const std::vector<double>& cost_points) {
        return run_viability_study(sc, config, cost_points);
      },
      py::arg("scenario"), py::arg("config") = "", py::arg("cost_points"));

  py::class_<ConvergenceRow>(m, "ConvergenceRow")
      .def_readonly("h", &ConvergenceRow::h)
      .def_readonly("voltage_mae", &ConvergenceRow::voltage_mae)
      .def_readonly("objective", &ConvergenceRow::objective);

  py::class_<ConvergenceStudy>(m, "ConvergenceStudy")
      .def_readonly("rows", &ConvergenceStudy::rows)
      .def_readonly("scenario_hash", &ConvergenceStudy::scenario_hash);

  m.def("run_convergence_study", &run_convergence_study, py::arg("scenario"), py::arg("h_min") = 1,
        py::arg("h_max") = 4);

  m.def("truncate_scenario", &truncate_scenario, py::arg("scenario"), py::arg("steps"));

  py::class_<SynthProfiles>(m, "SynthProfiles")
      .def_readonly("load_multiplier", &SynthProfiles::load_multiplier)
      .def_readonly("pv_availability", &SynthProfiles::pv_availability)
      .def_readonly("price_eur_per_kwh", &SynthProfiles::price_eur_per_kwh);

  m.def("synth_profiles", &synth_profiles, py::arg("seed"), py::arg("days"),
        py::arg("resolution_hours") = 1.0, py::arg("households") = 18);

  m.attr("__version__") = "0.1.0";
}
