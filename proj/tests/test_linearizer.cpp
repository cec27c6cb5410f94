#include <doctest.h>

#include "fbsopf/linearizer.hpp"
#include "fbsopf/opf.hpp"
#include "fbsopf/powerflow.hpp"
#include "fbsopf/scenario.hpp"
#include "support/helpers.hpp"

using namespace fbsopf;
using namespace fbsopf::test;

TEST_CASE("voltage sensitivity of a single branch") {
  RadialNetwork net = two_bus(0.1, 0.05);
  BibcMatrix bibc = build_bibc(net);
  Vec vmag = Vec::Ones(2);
  Mat bv = build_voltage_sensitivity(net, bibc, vmag);
  REQUIRE(bv.rows() == 1);
  REQUIRE(bv.cols() == 4);
  CHECK(bv(0, 1) == doctest::Approx(0.1));   // dp at bus 1
  CHECK(bv(0, 3) == doctest::Approx(0.05));  // dq at bus 1

  // uniform |v| = 0.9 scales every entry by 1/0.9
  Mat bv9 = build_voltage_sensitivity(net, bibc, Vec::Constant(2, 0.9));
  CHECK(bv9(0, 1) == doctest::Approx(0.1 / 0.9));
  CHECK(bv9(0, 3) == doctest::Approx(0.05 / 0.9));
}

TEST_CASE("branch sensitivity reduces to the incidence at unit voltage") {
  RadialNetwork net = chain3();
  BibcMatrix bibc = build_bibc(net);
  Mat br = build_branch_sensitivity(bibc, Vec::Ones(3));
  CHECK((br - bibc.full).cwiseAbs().maxCoeff() == doctest::Approx(0.0));

  // series current: injection at the leaf drives both branches equally
  Vec x = Vec::Zero(3);
  x[2] = 0.2;
  Vec ib = br * x;
  CHECK(ib[0] == doctest::Approx(0.2));
  CHECK(ib[1] == doctest::Approx(0.2));

  CHECK_THROWS_AS(build_branch_sensitivity(bibc, Vec::Zero(3)), InputError);
}

TEST_CASE("loss planes of a single branch") {
  RadialNetwork net = two_bus(0.1, 0.0);
  BibcMatrix bibc = build_bibc(net);
  Vec i0 = Vec::Constant(1, 0.25);
  Vec i1 = Vec::Constant(1, 0.75);
  LossPlanes planes = build_loss_planes(net, bibc, Vec::Ones(2), i0, i1);
  CHECK(planes.L0(0, 1) == doctest::Approx(0.025));
  CHECK(planes.L1(0, 1) == doctest::Approx(0.1));
  CHECK(planes.b[0] == doctest::Approx(-0.01875));

  CHECK_THROWS_AS(build_loss_planes(net, bibc, Vec::Ones(2), Vec::Zero(1), i1), InputError);
}

TEST_CASE("piecewise-linear loss evaluation on one branch") {
  RadialNetwork net = two_bus(0.1, 0.0);
  BibcMatrix bibc = build_bibc(net);
  LinearGridModel model =
      build_linear_model(net, bibc, Vec::Ones(2), Vec::Constant(1, 0.25), Vec::Constant(1, 0.75));

  auto loss_at = [&](double injection) {
    Vec x = Vec::Zero(2);
    x[1] = injection;
    return pwl_loss_eval(model, x)[0];
  };

  CHECK(loss_at(0.0) == doctest::Approx(0.0));
  // exact at the supporting currents
  CHECK(loss_at(0.25) == doctest::Approx(0.1 * 0.25 * 0.25).epsilon(1e-12));
  CHECK(loss_at(0.75) == doctest::Approx(0.1 * 0.75 * 0.75).epsilon(1e-12));
  CHECK(loss_at(-0.25) == doctest::Approx(0.1 * 0.25 * 0.25).epsilon(1e-12));
  // overestimate between supports: plane value 0.03125 vs exact 0.025
  CHECK(loss_at(0.5) == doctest::Approx(0.03125));
  CHECK(loss_at(0.5) >= 0.1 * 0.5 * 0.5);
  // underestimate beyond i1: plane value 0.08125 vs exact 0.1
  CHECK(loss_at(1.0) == doctest::Approx(0.08125));
  CHECK(loss_at(1.0) <= 0.1 * 1.0 * 1.0);
}

TEST_CASE("loss plane geometry on every cigre branch") {
  RadialNetwork net = load_grid(data_dir() / "cigre_lv.json");
  BibcMatrix bibc = build_bibc(net);
  const Index l = net.branch_count();
  Vec i0(l), i1(l);
  auto rng = test_rng(7);
  std::uniform_real_distribution<double> u01(0.05, 1.0);
  for (Index b = 0; b < l; ++b) {
    i0[b] = 0.25 * u01(rng) * 4.0;
    i1[b] = 3.0 * i0[b];
  }
  LinearGridModel model = build_linear_model(net, bibc, Vec::Ones(net.bus_count()), i0, i1);

  for (Index b = 0; b < l; ++b) {
    const double r = net.branches[b].resistance_pu;
    const Index bus = net.branches[b].to_bus;  // injection here puts current i on branch b
    auto loss_at = [&](double current) {
      Vec x = Vec::Zero(net.bus_count());
      x[bus] = current;
      return pwl_loss_eval(model, x)[b];
    };
    for (double s : {-1.0, 1.0}) {
      CHECK(std::abs(loss_at(s * i0[b]) - r * i0[b] * i0[b]) < 1e-12);
      CHECK(std::abs(loss_at(s * i1[b]) - r * i1[b] * i1[b]) < 1e-12);
    }
    CHECK(std::abs(loss_at(0.0)) < 1e-15);
    // dense sampling: overestimate strictly inside (0, i1) away from i0, underestimate beyond i1
    for (int k = 1; k <= 40; ++k) {
      const double i = i1[b] * k / 41.0;
      const double pw = loss_at(i);
      const double exact = r * i * i;
      CHECK(pw >= exact - 1e-12);
      CHECK(loss_at(-i) == doctest::Approx(pw));  // symmetry
    }
    for (double f : {1.1, 1.5, 3.0}) {
      const double i = f * (i0[b] + i1[b]) / 2.0 + i1[b];
      CHECK(loss_at(i) <= r * i * i + 1e-12);
    }
  }
}

TEST_CASE("model matrices scale linearly in 1/|v|") {
  RadialNetwork net = load_grid(data_dir() / "cigre_lv.json");
  BibcMatrix bibc = build_bibc(net);
  Vec i0 = Vec::Constant(net.branch_count(), 0.3);
  Vec i1 = Vec::Constant(net.branch_count(), 0.9);
  LinearGridModel m1 = build_linear_model(net, bibc, Vec::Ones(net.bus_count()), i0, i1);
  LinearGridModel m2 = build_linear_model(net, bibc, Vec::Constant(net.bus_count(), 2.0), i0, i1);
  CHECK((m1.B_v - 2.0 * m2.B_v).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((m1.B_r - 2.0 * m2.B_r).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((m1.L0 - 2.0 * m2.L0).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((m1.L1 - 2.0 * m2.L1).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((m1.b - m2.b).cwiseAbs().maxCoeff() == doctest::Approx(0.0));  // offsets don't depend on |v|
}

TEST_CASE("default supporting currents follow downstream generation capacity") {
  RadialNetwork net = chain3();
  BibcMatrix bibc = build_bibc(net);
  Mat cg = Mat::Zero(3, 1);
  cg(2, 0) = 1.0;  // one generator at the leaf
  Vec p_max = Vec::Constant(1, 0.4);
  SupportingCurrents sc = default_supporting_currents(bibc, cg, p_max);
  CHECK(sc.i0[0] == doctest::Approx(0.1));
  CHECK(sc.i0[1] == doctest::Approx(0.1));
  CHECK(sc.i1[0] == doctest::Approx(0.3));

  // no generation downstream of any branch: floor applies
  Mat cg0 = Mat::Zero(3, 1);
  cg0(0, 0) = 1.0;  // generator at the slack contributes no branch current
  SupportingCurrents floored = default_supporting_currents(bibc, cg0, p_max);
  CHECK(floored.i0[0] == doctest::Approx(1e-6));
  CHECK(floored.i1[1] == doctest::Approx(1e-6));
}

TEST_CASE("linear voltage prediction tracks the exact flow on cigre loads") {
  RadialNetwork net = load_grid(data_dir() / "cigre_lv.json");
  BibcMatrix bibc = build_bibc(net);
  const Index n = net.bus_count();
  Vec p = Vec::Zero(n), q = Vec::Zero(n);
  for (Index j = 1; j < n; ++j) {
    p[j] = -0.05;
    q[j] = -0.01;
  }
  Mat bv = build_voltage_sensitivity(net, bibc, Vec::Ones(n));
  Vec dv_pred(2 * n);
  dv_pred << p, q;
  Vec predicted = bv * dv_pred;

  InjectionSet inj{p, q};
  PowerFlowResult exact = solve_power_flow(net, bibc, inj);
  for (Index j = 1; j < n; ++j) {
    const double dv_exact = std::abs(exact.state.v[j]) - 1.0;
    CHECK(std::abs(predicted[j - 1] - dv_exact) <= 5e-3);
  }
}

TEST_CASE("linear branch currents track the exact flow at the pv-max dispatch") {
  // operating point: the 30 kW-per-roof scenario dispatched against the grid
  // limits, which is where the branch model is actually evaluated
  Scenario sc = load_scenario(data_dir() / "scenario_cigre_opf.json");
  const RadialNetwork& net = sc.net;
  BibcMatrix bibc = build_bibc(net);
  const Index n = net.bus_count();
  Vec p_d, q_d;
  sc.period_loads(0, p_d, q_d);
  DispatchSolution d = run_fbs_opf(net, sc.generator_specs(), sc.limits(), p_d, q_d, 1.0, 0.0, 1);

  Mat cg = generator_map(net, sc.generator_specs());
  Vec p = cg * d.p_gen - p_d;
  Vec q = cg * d.q_gen - q_d;
  Mat br = build_branch_sensitivity(bibc, Vec::Ones(n));
  Vec approx = br * p;

  InjectionSet inj{p, q};
  PowerFlowResult exact = solve_power_flow(net, bibc, inj);
  double worst = 0.0, scale = 0.0;
  for (Index b = 0; b < net.branch_count(); ++b) {
    worst = std::max(worst, std::abs(approx[b] - std::abs(exact.branch_currents[b])));
    scale = std::max(scale, std::abs(exact.branch_currents[b]));
  }
  CHECK(worst <= 0.05 * scale);
}
