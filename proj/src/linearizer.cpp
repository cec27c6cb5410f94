#include "fbsopf/linearizer.hpp"

#include <algorithm>

namespace fbsopf {

namespace {

Vec inverse_magnitudes(const Vec& vmag) {
  Vec inv(vmag.size());
  for (Eigen::Index j = 0; j < vmag.size(); ++j) {
    if (!(vmag[j] > 0.0)) throw InputError("voltage magnitude must be positive at bus " + std::to_string(j));
    inv[j] = 1.0 / vmag[j];
  }
  return inv;
}

}  // namespace

Mat build_voltage_sensitivity(const RadialNetwork& net, const BibcMatrix& bibc, const Vec& vmag) {
  const Index n = net.bus_count();
  const Index l = net.branch_count();
  if (vmag.size() != n) throw InputError("voltage state must match bus count");
  Vec vdf = inverse_magnitudes(vmag);

  Mat mf_vdf = bibc.full * vdf.asDiagonal();  // l x n
  Mat bv(n - 1, 2 * n);
  Vec r(l), x(l);
  for (Index b = 0; b < l; ++b) {
    r[b] = net.branches[b].resistance_pu;
    x[b] = net.branches[b].reactance_pu;
  }
  bv.leftCols(n) = bibc.reduced.transpose() * r.asDiagonal() * mf_vdf;
  bv.rightCols(n) = bibc.reduced.transpose() * x.asDiagonal() * mf_vdf;
  return bv;
}

Mat build_branch_sensitivity(const BibcMatrix& bibc, const Vec& vmag) {
  if (vmag.size() != bibc.bus_count()) throw InputError("voltage state must match bus count");
  Vec vdf = inverse_magnitudes(vmag);
  return bibc.full * vdf.asDiagonal();
}

LossPlanes build_loss_planes(const RadialNetwork& net, const BibcMatrix& bibc, const Vec& vmag,
                             const Vec& i0, const Vec& i1) {
  const Index l = net.branch_count();
  if (i0.size() != l || i1.size() != l) throw InputError("supporting current vectors must match branch count");
  for (Index b = 0; b < l; ++b) {
    if (!(i0[b] > 0.0) || !(i1[b] > 0.0)) {
      throw InputError("supporting currents must be positive on branch " + std::to_string(b));
    }
  }
  Mat mf_vdf = build_branch_sensitivity(bibc, vmag);

  LossPlanes planes;
  planes.L0 = Mat(l, bibc.bus_count());
  planes.L1 = Mat(l, bibc.bus_count());
  planes.b = Vec(l);
  for (Index b = 0; b < l; ++b) {
    const double r = net.branches[b].resistance_pu;
    planes.L0.row(b) = i0[b] * r * mf_vdf.row(b);
    planes.L1.row(b) = (i0[b] + i1[b]) * r * mf_vdf.row(b);
    planes.b[b] = -r * i0[b] * i1[b];
  }
  return planes;
}

LinearGridModel build_linear_model(const RadialNetwork& net, const BibcMatrix& bibc,
                                   const Vec& vmag, const Vec& i0, const Vec& i1) {
  LinearGridModel model;
  model.B_v = build_voltage_sensitivity(net, bibc, vmag);
  model.B_r = build_branch_sensitivity(bibc, vmag);
  LossPlanes planes = build_loss_planes(net, bibc, vmag, i0, i1);
  model.L0 = std::move(planes.L0);
  model.L1 = std::move(planes.L1);
  model.b = std::move(planes.b);
  model.i0 = i0;
  model.i1 = i1;
  model.voltage_state = vmag;
  return model;
}

SupportingCurrents default_supporting_currents(const BibcMatrix& bibc, const Mat& gen_map,
                                               const Vec& p_max) {
  if (gen_map.rows() != bibc.bus_count() || gen_map.cols() != p_max.size()) {
    throw InputError("generator map dimensions do not match network/generators");
  }
  Vec expected = bibc.full * (gen_map * p_max);
  SupportingCurrents sc;
  sc.i0 = Vec(expected.size());
  sc.i1 = Vec(expected.size());
  constexpr double kFloor = 1e-6;
  for (Eigen::Index b = 0; b < expected.size(); ++b) {
    if (expected[b] > 0.0) {
      sc.i0[b] = 0.25 * expected[b];
      sc.i1[b] = 0.75 * expected[b];
    } else {
      sc.i0[b] = kFloor;
      sc.i1[b] = kFloor;
    }
  }
  return sc;
}

Vec pwl_loss_eval(const LinearGridModel& model, const Vec& x) {
  if (x.size() != model.B_r.cols()) throw InputError("injection vector must match bus count");
  Vec p0 = model.L0 * x;
  Vec p1 = model.L1 * x;
  Vec out(model.b.size());
  for (Eigen::Index b = 0; b < out.size(); ++b) {
    out[b] = std::max({p0[b], -p0[b], p1[b] + model.b[b], -p1[b] + model.b[b]});
  }
  return out;
}

}  // namespace fbsopf
