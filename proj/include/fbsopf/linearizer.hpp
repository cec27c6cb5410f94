#pragma once

#include "fbsopf/grid.hpp"

namespace fbsopf {

/// Sensitivity operators and loss hyperplanes built from a voltage-magnitude
/// snapshot. Rebuilt whenever the sweep updates the voltages.
struct LinearGridModel {
  Mat B_v;            // (n-1) x 2n, [d|v|/dp | d|v|/dq]
  Mat B_r;            // l x n, branch current per unit active injection
  Mat L0;             // l x n, inner loss plane slopes
  Mat L1;             // l x n, outer loss plane slopes
  Vec b;              // l, outer plane offsets, <= 0
  Vec i0;             // l, inner supporting currents, > 0
  Vec i1;             // l, outer supporting currents, > 0
  Vec voltage_state;  // |v| snapshot the model was built from
};

/// B_v = [M^T R_d M_f |V_df|  |  M^T X_d M_f |V_df|], |V_df| = diag(1/|v|).
Mat build_voltage_sensitivity(const RadialNetwork& net, const BibcMatrix& bibc, const Vec& vmag);

/// B_r = M_f |V_df|.
Mat build_branch_sensitivity(const BibcMatrix& bibc, const Vec& vmag);

struct LossPlanes {
  Mat L0;
  Mat L1;
  Vec b;
};

/// Secant planes of r i^2 through the supporting currents:
///   L0 = diag(i0) R_d M_f |V_df|,  L1 = diag(i0+i1) R_d M_f |V_df|,
///   b_k = -r_k i0_k i1_k.
LossPlanes build_loss_planes(const RadialNetwork& net, const BibcMatrix& bibc, const Vec& vmag,
                             const Vec& i0, const Vec& i1);

LinearGridModel build_linear_model(const RadialNetwork& net, const BibcMatrix& bibc,
                                   const Vec& vmag, const Vec& i0, const Vec& i1);

/// Supporting currents at 25% / 75% of the maximum expected branch current
/// M_f C_g p_max. Branches with no downstream generation get a 1e-6 pu floor
/// so the planes stay non-degenerate.
struct SupportingCurrents {
  Vec i0;
  Vec i1;
};
SupportingCurrents default_supporting_currents(const BibcMatrix& bibc, const Mat& gen_map,
                                               const Vec& p_max);

/// Per-branch max{L0 x, -L0 x, L1 x + b, -L1 x + b} for an injection vector x.
Vec pwl_loss_eval(const LinearGridModel& model, const Vec& x);

}  // namespace fbsopf
