#include <doctest.h>

#include "fbsopf/opf.hpp"
#include "fbsopf/scenario.hpp"
#include "support/helpers.hpp"

using namespace fbsopf;
using namespace fbsopf::test;

namespace {

struct SinglePeriodSetup {
  RadialNetwork net;
  BibcMatrix bibc;
  std::vector<GeneratorSpec> gens;
  OperatingLimits limits;
  Vec p_d, q_d;
  LinearGridModel model;
};

SinglePeriodSetup two_bus_case(double feeder_p_min, double load = 0.05) {
  SinglePeriodSetup s;
  s.net = two_bus(0.1, 0.05);
  s.bibc = build_bibc(s.net);
  GeneratorSpec feeder{0, feeder_p_min, 10.0, -10.0, 10.0, 30.0, "feeder"};
  GeneratorSpec pv{1, 0.0, 0.3, -0.1, 0.1, 20.0, "pv"};
  s.gens = {feeder, pv};
  s.limits = OperatingLimits::from_network(s.net, 0.9, 1.1);
  s.p_d = Vec::Zero(2);
  s.q_d = Vec::Zero(2);
  s.p_d[1] = load;
  s.q_d[1] = load / 5.0;
  Vec p_max(2);
  p_max << 10.0, 0.3;
  SupportingCurrents sc = default_supporting_currents(s.bibc, generator_map(s.net, s.gens), p_max);
  s.model = build_linear_model(s.net, s.bibc, Vec::Ones(2), sc.i0, sc.i1);
  return s;
}

}  // namespace

TEST_CASE("constraint census of the two-bus problem") {
  SinglePeriodSetup s = two_bus_case(0.0);
  // census with a single generator, per the closed-form counts
  std::vector<GeneratorSpec> one_gen = {s.gens[1]};
  LpProblem p = assemble_single_period(s.net, s.model, one_gen, s.limits, s.p_d, s.q_d, 1.0);
  CHECK(p.num_vars() == 5);   // pg, qg, plp, plq, v
  CHECK(p.num_eq() == 2);     // balance + one voltage row
  CHECK(p.num_ineq() == 10);  // 8 loss planes + 2 branch limits
}

TEST_CASE("constraint census closed form on larger networks") {
  RadialNetwork net = load_grid(data_dir() / "cigre_lv.json");
  BibcMatrix bibc = build_bibc(net);
  const Index n = net.bus_count(), l = net.branch_count();
  std::vector<GeneratorSpec> gens;
  gens.push_back({0, -10.0, 10.0, -10.0, 10.0, 30.0, "feeder"});
  for (Index j = 1; j < n; ++j) gens.push_back({j, 0.0, 0.3, -0.1, 0.1, 20.0, "pv"});
  const Index ng = static_cast<Index>(gens.size());
  Vec p_max(ng);
  for (Index g = 0; g < ng; ++g) p_max[g] = gens[g].p_max;
  SupportingCurrents sc = default_supporting_currents(bibc, generator_map(net, gens), p_max);
  LinearGridModel model = build_linear_model(net, bibc, Vec::Ones(n), sc.i0, sc.i1);
  OperatingLimits limits = OperatingLimits::from_network(net, 0.9, 1.1);
  LpProblem p = assemble_single_period(net, model, gens, limits, Vec::Zero(n), Vec::Zero(n), 1.0);
  CHECK(p.num_vars() == 2 * ng + 2 * l + (n - 1));
  CHECK(p.num_eq() == 1 + (n - 1));
  CHECK(p.num_ineq() == 10 * l);
}

TEST_CASE("zero loads: generation only covers (near-zero) losses") {
  SinglePeriodSetup s = two_bus_case(0.0, 0.0);
  std::vector<GeneratorSpec> one_gen = {GeneratorSpec{0, 0.0, 10.0, -10.0, 10.0, 30.0, "feeder"}};
  LpProblem p = assemble_single_period(s.net, s.model, one_gen, s.limits, s.p_d, s.q_d, 1.0);
  LpSolution sol = solve_lp(p);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(std::abs(sol.objective) < 1e-7);
}

TEST_CASE("two-bus problem matches the brute-force vertex oracle") {
  // cheap pv at the load bus, expensive feeder that cannot export
  SinglePeriodSetup s = two_bus_case(0.0);
  LpProblem p = assemble_single_period(s.net, s.model, s.gens, s.limits, s.p_d, s.q_d, 1.0);
  LpSolution sol = solve_lp(p);
  REQUIRE(sol.status == LpStatus::Optimal);

  const double expect = brute_force_lp(p);
  CHECK(sol.objective == doctest::Approx(expect).epsilon(1e-7));

  // pv serves load plus the linearized losses; the feeder stays off
  DispatchSolution d = decode_dispatch(p, sol, 2, 1, 2);
  CHECK(d.p_gen[0] == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(d.p_gen[1] >= 0.05);
  CHECK(d.p_gen[1] == doctest::Approx(0.05 + d.loss_p.sum() + d.loss_q.sum()).epsilon(1e-6));
}

TEST_CASE("exporting feeder flips the optimum to full pv") {
  SinglePeriodSetup s = two_bus_case(-10.0);
  LpProblem p = assemble_single_period(s.net, s.model, s.gens, s.limits, s.p_d, s.q_d, 1.0);
  LpSolution sol = solve_lp(p);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(brute_force_lp(p)).epsilon(1e-7));
  DispatchSolution d = decode_dispatch(p, sol, 2, 1, 2);
  CHECK(d.p_gen[1] == doctest::Approx(0.3).epsilon(1e-6));  // pv maxed out
  CHECK(d.p_gen[0] < 0.0);                                  // feeder exports the surplus
}

TEST_CASE("iterative opf: early and converged iterations agree when nothing binds") {
  // realistic LV cable impedances: the voltage state barely moves, so the
  // first LP already sits at the converged optimum
  RadialNetwork net = chain3();
  net.branches[0].resistance_pu = 0.004;
  net.branches[0].reactance_pu = 0.002;
  net.branches[1].resistance_pu = 0.004;
  net.branches[1].reactance_pu = 0.002;
  std::vector<GeneratorSpec> gens;
  gens.push_back({0, -10.0, 10.0, -10.0, 10.0, 30.0, "feeder"});
  gens.push_back({2, 0.0, 0.2, -0.05, 0.05, 20.0, "pv"});
  OperatingLimits limits = OperatingLimits::from_network(net, 0.8, 1.2);
  Vec p_d = Vec::Zero(3), q_d = Vec::Zero(3);
  p_d[1] = 0.05;
  q_d[1] = 0.01;

  DispatchSolution h1 = run_fbs_opf(net, gens, limits, p_d, q_d, 1.0, 0.0, 1);
  DispatchSolution h4 = run_fbs_opf(net, gens, limits, p_d, q_d, 1.0, 0.0, 4);
  CHECK(h1.iterations == 1);
  CHECK(h4.iterations == 4);
  CHECK(std::abs(h1.objective - h4.objective) <= 1e-4 * std::abs(h4.objective));
}

TEST_CASE("epsilon stops the sweep once voltages settle") {
  RadialNetwork net = chain3();
  std::vector<GeneratorSpec> gens = {{0, -10.0, 10.0, -10.0, 10.0, 30.0, "feeder"},
                                     {2, 0.0, 0.2, -0.05, 0.05, 20.0, "pv"}};
  OperatingLimits limits = OperatingLimits::from_network(net, 0.8, 1.2);
  Vec p_d = Vec::Zero(3), q_d = Vec::Zero(3);
  p_d[1] = 0.05;
  DispatchSolution d = run_fbs_opf(net, gens, limits, p_d, q_d, 1.0, 1e-4, 10);
  CHECK(d.iterations < 10);
  CHECK(d.final_voltage_mae <= 1e-4);
}

TEST_CASE("infeasible voltage band raises with the binding family") {
  RadialNetwork net = chain3();
  std::vector<GeneratorSpec> gens = {{0, 0.0, 10.0, -10.0, 10.0, 30.0, "feeder"}};
  OperatingLimits limits = OperatingLimits::from_network(net, 1.01, 1.1);  // unreachable under load
  Vec p_d = Vec::Zero(3), q_d = Vec::Zero(3);
  p_d[2] = 0.5;
  try {
    run_fbs_opf(net, gens, limits, p_d, q_d, 1.0);
    FAIL("expected OpfError");
  } catch (const OpfError& e) {
    CHECK(e.status() == LpStatus::Infeasible);
    CHECK(std::string(e.what()).find("infeasible") != std::string::npos);
  }
}

TEST_CASE("projection: zero dispatch has no violations") {
  RadialNetwork net = chain3();
  std::vector<GeneratorSpec> gens = {{0, -10.0, 10.0, -10.0, 10.0, 30.0, "feeder"},
                                     {2, 0.0, 0.2, -0.05, 0.05, 20.0, "pv"}};
  OperatingLimits limits = OperatingLimits::from_network(net, 0.9, 1.1);
  DispatchSolution d;
  d.p_gen = Vec::Zero(2);
  d.q_gen = Vec::Zero(2);
  d.v = Vec::Ones(2);
  ProjectionReport rep = project_dispatch(net, gens, limits, Vec::Zero(3), Vec::Zero(3), 1.0, d);
  CHECK(rep.violations.empty());
  CHECK(rep.flow.total_loss == doctest::Approx(0.0));
}

TEST_CASE("projection: deliberate overload is reported against its branch") {
  RadialNetwork net = two_bus(0.01, 0.005, /*i_max=*/0.5);
  std::vector<GeneratorSpec> gens = {{1, 0.0, 2.0, -0.5, 0.5, 20.0, "pv"}};
  OperatingLimits limits = OperatingLimits::from_network(net, 0.9, 1.1);
  DispatchSolution d;
  d.p_gen = Vec::Constant(1, 1.5);  // far above the 0.5 pu branch limit
  d.q_gen = Vec::Zero(1);
  d.v = Vec::Ones(1);
  ProjectionReport rep = project_dispatch(net, gens, limits, Vec::Zero(2), Vec::Zero(2), 1.0, d);
  REQUIRE_FALSE(rep.violations.empty());
  CHECK(rep.violations[0].what == "branch");
  CHECK(rep.violations[0].entity == 0);
  CHECK(rep.violations[0].value > rep.violations[0].limit);
}
