// Interior-point LP solver (Mehrotra predictor-corrector on the normal
// equations) used behind the solve_lp contract. Multiperiod problems carry a
// period tag per variable in the registry; the solver partitions rows and
// columns by period, which makes A D A^T block tridiagonal and lets a blocked
// dense Cholesky run in O(N) for an N-period horizon. Columns that couple the
// whole horizon (sizing capacities) are split off and folded back in with a
// low-rank update. Everything is deterministic: fixed orderings, no threads.

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <memory>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "fbsopf/lp.hpp"

namespace fbsopf {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using SpMat = Eigen::SparseMatrix<double>;

// ---------------------------------------------------------------------------
// Presolve: bound checks, fixed variables, empty columns/rows.
// ---------------------------------------------------------------------------

struct Presolve {
  bool decided = false;
  LpStatus status = LpStatus::Optimal;
  double offset = 0.0;          // objective contribution of removed columns
  std::vector<Index> keep_col;  // surviving original columns
  std::vector<Index> col_map;   // original -> reduced (-1 removed)
  Vec fixed_value;              // per original column, meaningful if removed
  std::vector<char> removed;
};

Presolve run_presolve(const LpProblem& p, Vec& eq_rhs, Vec& ineq_rhs) {
  const Index n = p.num_vars();
  Presolve ps;
  ps.fixed_value = Vec::Zero(n);
  ps.removed.assign(n, 0);

  std::vector<int> col_nnz(n, 0);
  for (const auto& t : p.eq) ++col_nnz[t.col()];
  for (const auto& t : p.ineq) ++col_nnz[t.col()];

  for (Index j = 0; j < n; ++j) {
    const double lo = p.lower[j];
    const double up = p.upper[j];
    if (lo > up) {
      ps.decided = true;
      ps.status = LpStatus::Infeasible;
      return ps;
    }
    if (lo == up) {
      ps.removed[j] = 1;
      ps.fixed_value[j] = lo;
    } else if (col_nnz[j] == 0) {
      // Column appears in no row: settle it from the cost sign alone.
      double v;
      if (p.cost[j] > 0.0) {
        if (!std::isfinite(lo)) {
          ps.decided = true;
          ps.status = LpStatus::Unbounded;
          return ps;
        }
        v = lo;
      } else if (p.cost[j] < 0.0) {
        if (!std::isfinite(up)) {
          ps.decided = true;
          ps.status = LpStatus::Unbounded;
          return ps;
        }
        v = up;
      } else {
        v = std::isfinite(lo) ? std::max(lo, std::min(up, 0.0)) : std::min(up, 0.0);
      }
      ps.removed[j] = 1;
      ps.fixed_value[j] = v;
    }
  }

  ps.col_map.assign(n, -1);
  for (Index j = 0; j < n; ++j) {
    if (!ps.removed[j]) {
      ps.col_map[j] = static_cast<Index>(ps.keep_col.size());
      ps.keep_col.push_back(j);
    } else {
      ps.offset += p.cost[j] * ps.fixed_value[j];
    }
  }

  // Move fixed-column contributions to the right-hand sides.
  for (const auto& t : p.eq) {
    if (ps.removed[t.col()]) eq_rhs[t.row()] -= t.value() * ps.fixed_value[t.col()];
  }
  for (const auto& t : p.ineq) {
    if (ps.removed[t.col()]) ineq_rhs[t.row()] -= t.value() * ps.fixed_value[t.col()];
  }
  return ps;
}

// ---------------------------------------------------------------------------
// Folded problem: min c'x, A x = b, lo <= x <= up (slack columns appended).
// ---------------------------------------------------------------------------

struct Folded {
  SpMat A;  // m x n, column major
  Vec b;
  Vec c;
  Vec lo;
  Vec up;
  Index m = 0;
  Index n = 0;
  Index n_struct = 0;  // columns before the slack block
  Vec row_scale;       // m
  Vec col_scale;       // n_struct (slack columns unscaled)
  double obj_scale = 1.0;
  std::vector<Index> col_period;  // -1 = horizon-coupling (border) column
  std::vector<char> col_border;
};

Folded fold_problem(const LpProblem& p, const Presolve& ps, const Vec& eq_rhs, const Vec& ineq_rhs) {
  Folded f;
  const Index me = p.num_eq();
  const Index mi = p.num_ineq();
  const Index ns = static_cast<Index>(ps.keep_col.size());
  f.m = me + mi;
  f.n = ns + mi;
  f.n_struct = ns;

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(p.eq.size() + p.ineq.size() + static_cast<std::size_t>(mi));
  for (const auto& t : p.eq) {
    Index j = ps.col_map[t.col()];
    if (j >= 0) trip.emplace_back(t.row(), j, t.value());
  }
  for (const auto& t : p.ineq) {
    Index j = ps.col_map[t.col()];
    if (j >= 0) trip.emplace_back(me + t.row(), j, t.value());
  }

  // Ruiz equilibration over the structural block.
  f.row_scale = Vec::Ones(f.m);
  f.col_scale = Vec::Ones(ns);
  for (int pass = 0; pass < 6; ++pass) {
    Vec rmax = Vec::Zero(f.m), cmax = Vec::Zero(ns);
    for (const auto& t : trip) {
      double v = std::abs(t.value()) * f.row_scale[t.row()] * f.col_scale[t.col()];
      rmax[t.row()] = std::max(rmax[t.row()], v);
      cmax[t.col()] = std::max(cmax[t.col()], v);
    }
    for (Index i = 0; i < f.m; ++i) {
      if (rmax[i] > 0) f.row_scale[i] /= std::sqrt(rmax[i]);
    }
    for (Index j = 0; j < ns; ++j) {
      if (cmax[j] > 0) f.col_scale[j] /= std::sqrt(cmax[j]);
    }
  }

  for (auto& t : trip) {
    t = Eigen::Triplet<double>(t.row(), t.col(), t.value() * f.row_scale[t.row()] * f.col_scale[t.col()]);
  }
  for (Index r = 0; r < mi; ++r) trip.emplace_back(me + r, ns + r, f.row_scale[me + r]);

  f.A.resize(f.m, f.n);
  f.A.setFromTriplets(trip.begin(), trip.end());
  f.A.makeCompressed();

  f.b = Vec(f.m);
  f.b.head(me) = eq_rhs.cwiseProduct(f.row_scale.head(me));
  f.b.tail(mi) = ineq_rhs.cwiseProduct(f.row_scale.tail(mi));

  f.c = Vec::Zero(f.n);
  f.lo = Vec::Zero(f.n);
  f.up = Vec::Constant(f.n, kInf);
  for (Index j = 0; j < ns; ++j) {
    const Index oj = ps.keep_col[j];
    f.c[j] = p.cost[oj] * f.col_scale[j];
    f.lo[j] = p.lower[oj] / f.col_scale[j];
    f.up[j] = p.upper[oj] / f.col_scale[j];
  }
  f.obj_scale = std::max(1.0, f.c.cwiseAbs().maxCoeff());
  f.c /= f.obj_scale;

  // Period tags drive the staged kernel; slack columns inherit their row's
  // period once row stages are known (resolved in the structure analysis).
  f.col_period.assign(f.n, 0);
  f.col_border.assign(f.n, 0);
  const bool tagged = p.vars.size() == p.num_vars();
  for (Index j = 0; j < ns; ++j) {
    if (!tagged) continue;
    const VarInfo& vi = p.vars.info(ps.keep_col[j]);
    if (vi.kind == VarKind::Capacity) {
      f.col_border[j] = 1;
      f.col_period[j] = -1;
    } else {
      f.col_period[j] = vi.period;
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Normal-equation kernels.
// ---------------------------------------------------------------------------

class NormalKernel {
 public:
  virtual ~NormalKernel() = default;
  // Factor M = sum_j dinv_j a_j a_j' + rho I over non-border columns.
  virtual bool factor(const Vec& dinv, double rho) = 0;
  virtual void solve_inplace(Vec& r) const = 0;
};

// Dense kernel for single-stage problems of moderate size.
class DenseKernel : public NormalKernel {
 public:
  DenseKernel(const Folded& f) : f_(f) {}

  bool factor(const Vec& dinv, double rho) override {
    const Index m = f_.m;
    M_.setZero(m, m);
    for (Index j = 0; j < f_.n; ++j) {
      if (f_.col_border[j]) continue;
      const double d = dinv[j];
      for (SpMat::InnerIterator it1(f_.A, j); it1; ++it1) {
        for (SpMat::InnerIterator it2(f_.A, j); it2 && it2.row() <= it1.row(); ++it2) {
          M_(it1.row(), it2.row()) += d * it1.value() * it2.value();
        }
      }
    }
    M_.diagonal().array() += rho;
    llt_.compute(M_.selfadjointView<Eigen::Lower>());
    return llt_.info() == Eigen::Success;
  }

  void solve_inplace(Vec& r) const override { llt_.solveInPlace(r); }

 private:
  const Folded& f_;
  Mat M_;
  Eigen::LLT<Mat> llt_;
};

// Generic sparse fallback.
class SparseKernel : public NormalKernel {
 public:
  SparseKernel(const Folded& f) : f_(f) {
    std::vector<Eigen::Triplet<double>> trip;
    for (Index j = 0; j < f_.n; ++j) {
      if (!f_.col_border[j]) {
        for (SpMat::InnerIterator it(f_.A, j); it; ++it) trip.emplace_back(it.row(), j, it.value());
      }
    }
    An_.resize(f_.m, f_.n);
    An_.setFromTriplets(trip.begin(), trip.end());
    An_.makeCompressed();
    analyzed_ = false;
  }

  bool factor(const Vec& dinv, double rho) override {
    SpMat scaled = An_;
    for (Index j = 0; j < f_.n; ++j) {
      const double s = std::sqrt(std::max(dinv[j], 0.0));
      for (SpMat::InnerIterator it(scaled, j); it; ++it) it.valueRef() *= s;
    }
    SpMat M = (scaled * SpMat(scaled.transpose())).pruned();
    SpMat eye(f_.m, f_.m);
    eye.setIdentity();
    M += rho * eye;
    if (!analyzed_) {
      ldlt_.analyzePattern(M);
      analyzed_ = true;
    }
    ldlt_.factorize(M);
    return ldlt_.info() == Eigen::Success;
  }

  void solve_inplace(Vec& r) const override { r = ldlt_.solve(r); }

 private:
  const Folded& f_;
  SpMat An_;
  Eigen::SimplicialLDLT<SpMat> ldlt_;
  bool analyzed_ = false;
};

// Block-tridiagonal kernel for period-staged problems. Rows are grouped by
// stage; a column of period p only touches rows of stages p and p+1, so the
// normal matrix couples adjacent stages only.
class StagedKernel : public NormalKernel {
 public:
  // Returns nullptr if the problem does not have usable stage structure.
  static std::unique_ptr<StagedKernel> try_build(const Folded& f) {
    auto k = std::unique_ptr<StagedKernel>(new StagedKernel(f));
    if (!k->build_plan()) return nullptr;
    return k;
  }

  bool factor(const Vec& dinv, double rho) override {
    const int K = num_stages_;
    for (int s = 0; s < K; ++s) {
      diag_[s].setZero();
      off_[s].setZero();
    }
    // Scatter column outer products into the stage blocks.
    for (Index j = 0; j < f_.n; ++j) {
      if (f_.col_border[j]) continue;
      const ColPlan& cp = col_plan_[j];
      const double d = dinv[j];
      const auto* idx = f_.A.innerIndexPtr();
      const auto* val = f_.A.valuePtr();
      const auto start = f_.A.outerIndexPtr()[j];
      const auto end = f_.A.outerIndexPtr()[j + 1];
      (void)idx;
      Mat& Da = diag_[cp.stage];
      for (auto e1 = start; e1 < end; ++e1) {
        const double dv1 = d * val[e1];
        const Index l1 = entry_local_[e1];
        const bool up1 = entry_next_[e1];
        for (auto e2 = start; e2 <= e1; ++e2) {
          const Index l2 = entry_local_[e2];
          const bool up2 = entry_next_[e2];
          const double v = dv1 * val[e2];
          if (!up1 && !up2) {
            if (l1 >= l2) Da(l1, l2) += v; else Da(l2, l1) += v;
          } else if (up1 && up2) {
            Mat& Db = diag_[cp.stage + 1];
            if (l1 >= l2) Db(l1, l2) += v; else Db(l2, l1) += v;
          } else {
            // cross term between stage s rows and stage s+1 interface rows
            const Index lo = up1 ? l2 : l1;
            const Index hi_if = up1 ? entry_iface_[e1] : entry_iface_[e2];
            off_[cp.stage](lo, hi_if) += v;
          }
        }
      }
    }
    // Blocked Cholesky down the stages.
    for (int s = 0; s < K; ++s) {
      diag_[s].diagonal().array() += rho;
      if (s > 0 && iface_[s].size() > 0) {
        // subtract U_{s-1}' U_{s-1} on the interface rows
        const Mat& U = u_[s - 1];
        Mat S = U.transpose() * U;
        const auto& ifc = iface_[s];
        for (std::size_t a = 0; a < ifc.size(); ++a) {
          for (std::size_t bb = 0; bb <= a; ++bb) diag_[s](ifc[a], ifc[bb]) -= S(a, bb);
        }
      }
      llt_[s].compute(diag_[s].selfadjointView<Eigen::Lower>());
      if (llt_[s].info() != Eigen::Success) return false;
      if (s + 1 < K && iface_[s + 1].size() > 0) {
        u_[s] = llt_[s].matrixL().solve(off_[s]);
      }
    }
    return true;
  }

  void solve_inplace(Vec& r) const override {
    const int K = num_stages_;
    // gather into per-stage work vectors
    for (int s = 0; s < K; ++s) {
      auto& w = work_[s];
      const auto& rows = stage_rows_[s];
      w.resize(static_cast<Index>(rows.size()));
      for (std::size_t i = 0; i < rows.size(); ++i) w[static_cast<Index>(i)] = r[rows[i]];
    }
    for (int s = 0; s < K; ++s) {
      if (s > 0 && iface_[s].size() > 0) {
        Vec t = u_[s - 1].transpose() * work_[s - 1];
        const auto& ifc = iface_[s];
        for (std::size_t a = 0; a < ifc.size(); ++a) work_[s][ifc[a]] -= t[static_cast<Index>(a)];
      }
      llt_[s].matrixL().solveInPlace(work_[s]);
    }
    for (int s = K - 1; s >= 0; --s) {
      if (s + 1 < K && iface_[s + 1].size() > 0) {
        const auto& ifc = iface_[s + 1];
        Vec t(static_cast<Index>(ifc.size()));
        for (std::size_t a = 0; a < ifc.size(); ++a) t[static_cast<Index>(a)] = work_[s + 1][ifc[a]];
        work_[s] -= u_[s] * t;
      }
      llt_[s].matrixU().solveInPlace(work_[s]);
    }
    for (int s = 0; s < K; ++s) {
      const auto& rows = stage_rows_[s];
      for (std::size_t i = 0; i < rows.size(); ++i) r[rows[i]] = work_[s][static_cast<Index>(i)];
    }
  }

 private:
  explicit StagedKernel(const Folded& f) : f_(f) {}

  struct ColPlan {
    int stage = 0;
  };

  bool build_plan() {
    const Index m = f_.m;
    const Index n = f_.n;
    // Row stage = max period among structural columns; validate the span.
    std::vector<int> row_min(m, std::numeric_limits<int>::max());
    std::vector<int> row_max(m, -1);
    int max_period = -1;
    for (Index j = 0; j < f_.n_struct; ++j) {
      if (f_.col_border[j]) continue;
      const int p = static_cast<int>(f_.col_period[j]);
      max_period = std::max(max_period, p);
      for (SpMat::InnerIterator it(f_.A, j); it; ++it) {
        row_min[it.row()] = std::min(row_min[it.row()], p);
        row_max[it.row()] = std::max(row_max[it.row()], p);
      }
    }
    num_stages_ = max_period + 1;
    if (num_stages_ < 2) return false;
    std::vector<int> row_stage(m);
    for (Index r = 0; r < m; ++r) {
      if (row_max[r] < 0) {
        row_stage[r] = 0;  // row touches only border columns
      } else {
        if (row_max[r] - row_min[r] > 1) return false;
        row_stage[r] = row_max[r];
      }
    }

    stage_rows_.assign(num_stages_, {});
    row_local_.assign(m, 0);
    for (Index r = 0; r < m; ++r) {
      row_local_[r] = static_cast<Index>(stage_rows_[row_stage[r]].size());
      stage_rows_[row_stage[r]].push_back(r);
    }

    // Column plans: local row indices and the stage-(p+1) interface set.
    // Each row lives in exactly one stage, so one position array suffices.
    col_plan_.assign(n, {});
    entry_local_.assign(f_.A.nonZeros(), 0);
    entry_next_.assign(f_.A.nonZeros(), 0);
    entry_iface_.assign(f_.A.nonZeros(), -1);
    std::vector<std::vector<Index>> iface_global(num_stages_);
    std::vector<Index> iface_pos(m, -1);

    for (Index j = 0; j < n; ++j) {
      if (f_.col_border[j]) continue;
      int p;
      if (j < f_.n_struct) {
        p = static_cast<int>(f_.col_period[j]);
      } else {
        // slack column: single entry, inherits its row's stage
        SpMat::InnerIterator it(f_.A, j);
        p = row_stage[it.row()];
      }
      col_plan_[j].stage = p;
      const auto start = f_.A.outerIndexPtr()[j];
      const auto end = f_.A.outerIndexPtr()[j + 1];
      const auto* idx = f_.A.innerIndexPtr();
      for (auto e = start; e < end; ++e) {
        const Index r = idx[e];
        const int rs = row_stage[r];
        if (rs != p && rs != p + 1) return false;
        entry_local_[e] = row_local_[r];
        if (rs == p + 1) {
          entry_next_[e] = 1;
          if (iface_pos[r] < 0) {
            iface_pos[r] = static_cast<Index>(iface_global[rs].size());
            iface_global[rs].push_back(r);
          }
          entry_iface_[e] = iface_pos[r];
        }
      }
    }

    iface_.assign(num_stages_, {});
    for (int s = 0; s < num_stages_; ++s) {
      iface_[s].reserve(iface_global[s].size());
      for (Index r : iface_global[s]) iface_[s].push_back(row_local_[r]);
    }

    diag_.resize(num_stages_);
    off_.resize(num_stages_);
    u_.resize(num_stages_);
    llt_.resize(num_stages_);
    work_.resize(num_stages_);
    for (int s = 0; s < num_stages_; ++s) {
      const Index ms = static_cast<Index>(stage_rows_[s].size());
      diag_[s].resize(ms, ms);
      const Index ifc = s + 1 < num_stages_ ? static_cast<Index>(iface_[s + 1].size()) : 0;
      off_[s].resize(ms, ifc);
      u_[s].resize(ms, ifc);
    }
    // Interface re-check: the iface entries of off_[s] are rows of stage s+1.
    return true;
  }

  const Folded& f_;
  int num_stages_ = 0;
  std::vector<ColPlan> col_plan_;
  std::vector<Index> entry_local_;
  std::vector<char> entry_next_;
  std::vector<Index> entry_iface_;
  std::vector<std::vector<Index>> stage_rows_;
  std::vector<Index> row_local_;
  std::vector<std::vector<Index>> iface_;  // per stage: local row ids coupling to the previous stage
  std::vector<Mat> diag_;
  std::vector<Mat> off_;
  std::vector<Mat> u_;
  std::vector<Eigen::LLT<Mat>> llt_;
  mutable std::vector<Vec> work_;
};

// ---------------------------------------------------------------------------
// KKT driver: kernel + low-rank border update + iterative refinement.
// ---------------------------------------------------------------------------

class KktSolver {
 public:
  KktSolver(Folded& f) : f_(f) {
    for (Index j = 0; j < f_.n; ++j) {
      if (f_.col_border[j]) border_cols_.push_back(j);
    }
    if (static_cast<Index>(border_cols_.size()) > 256) {
      // too many coupling columns for the low-rank update to pay off;
      // fold them back into the kernel instead
      border_cols_.clear();
      std::fill(f_.col_border.begin(), f_.col_border.end(), 0);
    }
    auto staged = StagedKernel::try_build(f_);
    if (staged) {
      kernel_ = std::move(staged);
    } else if (f_.m <= 3000) {
      kernel_ = std::make_unique<DenseKernel>(f_);
    } else {
      kernel_ = std::make_unique<SparseKernel>(f_);
    }
    if (!border_cols_.empty()) {
      Ab_ = Mat::Zero(f_.m, static_cast<Index>(border_cols_.size()));
      for (std::size_t k = 0; k < border_cols_.size(); ++k) {
        for (SpMat::InnerIterator it(f_.A, border_cols_[k]); it; ++it) {
          Ab_(it.row(), static_cast<Index>(k)) = it.value();
        }
      }
    }
  }

  bool factor(const Vec& dinv, double rho) {
    dinv_ = dinv;
    rho_ = rho;
    if (!kernel_->factor(dinv, rho)) return false;
    if (!border_cols_.empty()) {
      const Index g = static_cast<Index>(border_cols_.size());
      G_ = Ab_;
      for (Index k = 0; k < g; ++k) {
        Vec col = G_.col(k);
        kernel_->solve_inplace(col);
        G_.col(k) = col;
      }
      Mat Kmat = Ab_.transpose() * G_;
      for (Index k = 0; k < g; ++k) Kmat(k, k) += 1.0 / dinv_[border_cols_[k]];
      kldlt_.compute(Kmat);
      if (kldlt_.info() != Eigen::Success) return false;
    }
    return true;
  }

  // Solve (A diag(dinv) A' + rho I) y = rhs including border columns.
  Vec solve(const Vec& rhs) const {
    Vec y = solve_once(rhs);
    // one refinement pass against the full normal operator
    Vec r = rhs - apply(y);
    if (r.cwiseAbs().maxCoeff() > 1e-13 * std::max(1.0, rhs.cwiseAbs().maxCoeff())) {
      y += solve_once(r);
    }
    return y;
  }

  Vec apply(const Vec& y) const {
    Vec t = f_.A.transpose() * y;
    t.array() *= dinv_.array();
    return f_.A * t + rho_ * y;
  }

 private:
  Vec solve_once(const Vec& rhs) const {
    Vec y = rhs;
    kernel_->solve_inplace(y);
    if (!border_cols_.empty()) {
      Vec t = kldlt_.solve(Ab_.transpose() * y);
      Vec corr = G_ * t;
      y -= corr;
    }
    return y;
  }

  Folded& f_;
  std::unique_ptr<NormalKernel> kernel_;
  std::vector<Index> border_cols_;
  Mat Ab_;
  Mat G_;
  Eigen::LDLT<Mat> kldlt_;
  Vec dinv_;
  double rho_ = 0.0;
};

// ---------------------------------------------------------------------------
// Mehrotra predictor-corrector.
// ---------------------------------------------------------------------------

struct Iterate {
  Vec x, y, zl, zu;
};

struct StepDir {
  Vec dx, dy, dzl, dzu;
};

class Ipm {
 public:
  Ipm(Folded& f, const SolverOptions& opt) : f_(f), opt_(opt), kkt_(f) {
    has_lo_.assign(f_.n, 0);
    has_up_.assign(f_.n, 0);
    nb_ = 0;
    for (Index j = 0; j < f_.n; ++j) {
      if (std::isfinite(f_.lo[j])) {
        has_lo_[j] = 1;
        ++nb_;
      }
      if (std::isfinite(f_.up[j])) {
        has_up_[j] = 1;
        ++nb_;
      }
    }
    bnorm_ = f_.b.size() ? f_.b.cwiseAbs().maxCoeff() : 0.0;
    cnorm_ = f_.c.size() ? f_.c.cwiseAbs().maxCoeff() : 0.0;
  }

  LpStatus run(Iterate& w, int& iters, double& rel_p, double& rel_d, double& rel_g);

  void default_start(Iterate& w);
  void warm_start_from(Iterate& w, const Vec& x0);

 private:
  double mu_of(const Iterate& w) const {
    if (nb_ == 0) return 0.0;
    double s = 0.0;
    for (Index j = 0; j < f_.n; ++j) {
      if (has_lo_[j]) s += w.zl[j] * (w.x[j] - f_.lo[j]);
      if (has_up_[j]) s += w.zu[j] * (f_.up[j] - w.x[j]);
    }
    return s / static_cast<double>(nb_);
  }

  void residuals(const Iterate& w, Vec& rp, Vec& rd) const {
    rp = f_.b - f_.A * w.x;
    rd = f_.c - f_.A.transpose() * w.y;
    for (Index j = 0; j < f_.n; ++j) rd[j] += -w.zl[j] + w.zu[j];
  }

  // Solve the Newton system for given complementarity targets cl/cu.
  StepDir newton(const Iterate& w, const Vec& rp, const Vec& rd, const Vec& cl, const Vec& cu) const {
    StepDir d;
    Vec rhat = rd;
    for (Index j = 0; j < f_.n; ++j) {
      if (has_lo_[j]) rhat[j] -= cl[j] / (w.x[j] - f_.lo[j]);
      if (has_up_[j]) rhat[j] += cu[j] / (f_.up[j] - w.x[j]);
    }
    Vec rhs = rp + f_.A * dinv_.cwiseProduct(rhat);
    d.dy = kkt_.solve(rhs);
    d.dx = dinv_.cwiseProduct(f_.A.transpose() * d.dy - rhat);
    d.dzl = Vec::Zero(f_.n);
    d.dzu = Vec::Zero(f_.n);
    for (Index j = 0; j < f_.n; ++j) {
      if (has_lo_[j]) d.dzl[j] = (cl[j] - w.zl[j] * d.dx[j]) / (w.x[j] - f_.lo[j]);
      if (has_up_[j]) d.dzu[j] = (cu[j] + w.zu[j] * d.dx[j]) / (f_.up[j] - w.x[j]);
    }
    return d;
  }

  double max_primal_step(const Iterate& w, const Vec& dx) const {
    double a = 1e30;
    for (Index j = 0; j < f_.n; ++j) {
      if (has_lo_[j] && dx[j] < 0) a = std::min(a, (f_.lo[j] - w.x[j]) / dx[j]);
      if (has_up_[j] && dx[j] > 0) a = std::min(a, (f_.up[j] - w.x[j]) / dx[j]);
    }
    return a;
  }

  double max_dual_step(const Iterate& w, const StepDir& d) const {
    double a = 1e30;
    for (Index j = 0; j < f_.n; ++j) {
      if (has_lo_[j] && d.dzl[j] < 0) a = std::min(a, -w.zl[j] / d.dzl[j]);
      if (has_up_[j] && d.dzu[j] < 0) a = std::min(a, -w.zu[j] / d.dzu[j]);
    }
    return a;
  }

  bool primal_infeasibility_certificate(const Iterate& w) const;
  bool dual_infeasibility_certificate(const Iterate& w) const;

  const Folded& f_;
  SolverOptions opt_;
  KktSolver kkt_;
  std::vector<char> has_lo_, has_up_;
  Index nb_ = 0;
  double bnorm_ = 0.0, cnorm_ = 0.0;
  Vec dinv_;
};

void Ipm::default_start(Iterate& w) {
  // Least-squares style start: factor with unit scaling once.
  dinv_ = Vec::Ones(f_.n);
  const bool ok = kkt_.factor(dinv_, 1e-8);
  w.x = Vec::Zero(f_.n);
  w.y = Vec::Zero(f_.m);
  if (ok && f_.m > 0) {
    w.y = kkt_.solve(f_.b);
    w.x = f_.A.transpose() * w.y;  // min-norm point of A x = b
    w.y = kkt_.solve(f_.A * f_.c);
  }
  Vec dus = f_.c - f_.A.transpose() * w.y;

  w.zl = Vec::Zero(f_.n);
  w.zu = Vec::Zero(f_.n);
  for (Index j = 0; j < f_.n; ++j) {
    const double lo = f_.lo[j];
    const double up = f_.up[j];
    if (has_lo_[j] && has_up_[j]) {
      const double wdt = up - lo;
      const double margin = 0.25 * wdt;
      w.x[j] = std::clamp(w.x[j], lo + margin, up - margin);
      w.zl[j] = std::max(1.0, std::abs(dus[j]));
      w.zu[j] = std::max(1.0, std::abs(dus[j]));
    } else if (has_lo_[j]) {
      w.x[j] = std::max(w.x[j], lo + std::max(1.0, 0.1 * std::abs(lo)));
      w.zl[j] = std::max(1.0, std::abs(dus[j]));
    } else if (has_up_[j]) {
      w.x[j] = std::min(w.x[j], up - std::max(1.0, 0.1 * std::abs(up)));
      w.zu[j] = std::max(1.0, std::abs(dus[j]));
    }
  }
}

void Ipm::warm_start_from(Iterate& w, const Vec& x0) {
  default_start(w);
  if (x0.size() != f_.n) return;
  for (Index j = 0; j < f_.n; ++j) {
    double v = x0[j];
    const double pad = 1e-4 * (1.0 + std::abs(v));
    if (has_lo_[j]) v = std::max(v, f_.lo[j] + pad);
    if (has_up_[j]) v = std::min(v, f_.up[j] - pad);
    if (has_lo_[j] && has_up_[j] && f_.up[j] - f_.lo[j] < 2 * pad) v = 0.5 * (f_.lo[j] + f_.up[j]);
    w.x[j] = v;
  }
}

bool Ipm::primal_infeasibility_certificate(const Iterate& w) const {
  const double s = std::max({w.y.size() ? w.y.cwiseAbs().maxCoeff() : 0.0,
                             w.zl.cwiseAbs().maxCoeff(), w.zu.cwiseAbs().maxCoeff()});
  if (s < 1e2) return false;
  Vec v = f_.A.transpose() * w.y;
  double gain = f_.b.dot(w.y);
  for (Index j = 0; j < f_.n; ++j) {
    v[j] += w.zl[j] - w.zu[j];
    if (has_lo_[j]) gain += f_.lo[j] * w.zl[j];
    if (has_up_[j]) gain -= f_.up[j] * w.zu[j];
  }
  return v.cwiseAbs().maxCoeff() <= 1e-9 * s && gain >= 1e-7 * s;
}

bool Ipm::dual_infeasibility_certificate(const Iterate& w) const {
  const double s = w.x.cwiseAbs().maxCoeff();
  if (s < 1e4) return false;
  Vec d = w.x / s;
  double viol = (f_.A * d).cwiseAbs().maxCoeff();
  for (Index j = 0; j < f_.n; ++j) {
    if (has_lo_[j]) viol = std::max(viol, std::max(0.0, -d[j]));
    if (has_up_[j]) viol = std::max(viol, std::max(0.0, d[j]));
  }
  return viol <= 1e-7 && f_.c.dot(d) < -1e-7;
}

LpStatus Ipm::run(Iterate& w, int& iters, double& rel_p, double& rel_d, double& rel_g) {
  Vec rp, rd;
  double mu = 0.0;
  int stall = 0;

  // The barrier tail can destabilize once mu reaches machine scale, so keep
  // the best iterate and fall back to it if the current one degrades.
  Iterate best;
  double best_err = kInf;
  double best_p = kInf, best_d = kInf, best_g = kInf;

  auto finish = [&]() -> LpStatus {
    if (best_err < kInf) {
      w = best;
      rel_p = best_p;
      rel_d = best_d;
      rel_g = best_g;
    }
    if (rel_p <= 1e3 * opt_.tol_feas && rel_d <= 1e3 * opt_.tol_feas && rel_g <= 1e3 * opt_.tol_gap) {
      return LpStatus::Optimal;
    }
    return LpStatus::IterationLimit;
  };

  for (iters = 0; iters < opt_.max_iter; ++iters) {
    residuals(w, rp, rd);
    mu = mu_of(w);
    const double pobj = f_.c.dot(w.x);
    double dobj = f_.b.dot(w.y);
    for (Index j = 0; j < f_.n; ++j) {
      if (has_lo_[j]) dobj += f_.lo[j] * w.zl[j];
      if (has_up_[j]) dobj -= f_.up[j] * w.zu[j];
    }
    rel_p = (f_.m ? rp.cwiseAbs().maxCoeff() : 0.0) / (1.0 + bnorm_);
    rel_d = rd.cwiseAbs().maxCoeff() / (1.0 + cnorm_);
    rel_g = std::abs(pobj - dobj) / (1.0 + std::abs(pobj));
    if (opt_.verbose) {
      std::cerr << "ipm it=" << iters << " mu=" << mu << " rp=" << rel_p << " rd=" << rel_d
                << " gap=" << rel_g << "\n";
    }
    const double err = rel_p + rel_d + rel_g;
    if (!std::isfinite(err) || !std::isfinite(mu)) return finish();
    if (rel_p <= opt_.tol_feas && rel_d <= opt_.tol_feas && rel_g <= opt_.tol_gap) {
      return LpStatus::Optimal;
    }
    if (primal_infeasibility_certificate(w)) return LpStatus::Infeasible;
    if (dual_infeasibility_certificate(w)) return LpStatus::Unbounded;

    if (err < 0.9 * best_err) {
      stall = 0;
    } else {
      ++stall;
    }
    if (err < best_err) {
      best = w;
      best_err = err;
      best_p = rel_p;
      best_d = rel_d;
      best_g = rel_g;
    }
    if (stall > 12) return finish();

    // Scaling matrix
    dinv_ = Vec(f_.n);
    for (Index j = 0; j < f_.n; ++j) {
      double theta = 1e-9;
      if (has_lo_[j]) theta += w.zl[j] / (w.x[j] - f_.lo[j]);
      if (has_up_[j]) theta += w.zu[j] / (f_.up[j] - w.x[j]);
      dinv_[j] = 1.0 / theta;
    }
    double rho = 1e-9;
    bool factored = false;
    for (int attempt = 0; attempt < 4 && !factored; ++attempt) {
      factored = kkt_.factor(dinv_, rho);
      if (!factored) rho *= 1e3;
    }
    if (!factored) return LpStatus::IterationLimit;

    // Predictor
    Vec cl = Vec::Zero(f_.n), cu = Vec::Zero(f_.n);
    for (Index j = 0; j < f_.n; ++j) {
      if (has_lo_[j]) cl[j] = -(w.x[j] - f_.lo[j]) * w.zl[j];
      if (has_up_[j]) cu[j] = -(f_.up[j] - w.x[j]) * w.zu[j];
    }
    StepDir aff = newton(w, rp, rd, cl, cu);
    const double ap_aff = std::min(1.0, max_primal_step(w, aff.dx));
    const double ad_aff = std::min(1.0, max_dual_step(w, aff));

    double mu_aff = 0.0;
    if (nb_ > 0) {
      for (Index j = 0; j < f_.n; ++j) {
        if (has_lo_[j]) mu_aff += (w.zl[j] + ad_aff * aff.dzl[j]) * (w.x[j] + ap_aff * aff.dx[j] - f_.lo[j]);
        if (has_up_[j]) mu_aff += (w.zu[j] + ad_aff * aff.dzu[j]) * (f_.up[j] - w.x[j] - ap_aff * aff.dx[j]);
      }
      mu_aff /= static_cast<double>(nb_);
    }
    const double sigma = mu > 0 ? std::clamp(std::pow(mu_aff / mu, 3.0), 1e-8, 1.0 - 1e-8) : 0.0;

    // Corrector
    for (Index j = 0; j < f_.n; ++j) {
      if (has_lo_[j]) cl[j] = sigma * mu - (w.x[j] - f_.lo[j]) * w.zl[j] - aff.dx[j] * aff.dzl[j];
      if (has_up_[j]) cu[j] = sigma * mu - (f_.up[j] - w.x[j]) * w.zu[j] + aff.dx[j] * aff.dzu[j];
    }
    StepDir dir = newton(w, rp, rd, cl, cu);
    const double eta = 0.9995;
    const double ap = std::min(1.0, eta * max_primal_step(w, dir.dx));
    const double ad = std::min(1.0, eta * max_dual_step(w, dir));

    w.x += ap * dir.dx;
    w.y += ad * dir.dy;
    w.zl += ad * dir.dzl;
    w.zu += ad * dir.dzu;
    // keep the iterate strictly interior so the barrier terms stay finite
    for (Index j = 0; j < f_.n; ++j) {
      if (has_lo_[j]) {
        w.zl[j] = std::max(w.zl[j], 1e-300);
        if (w.x[j] <= f_.lo[j]) w.x[j] = f_.lo[j] + 1e-14 * (1.0 + std::abs(f_.lo[j]));
      }
      if (has_up_[j]) {
        w.zu[j] = std::max(w.zu[j], 1e-300);
        if (w.x[j] >= f_.up[j]) w.x[j] = f_.up[j] - 1e-14 * (1.0 + std::abs(f_.up[j]));
      }
    }
  }
  return finish();
}

// ---------------------------------------------------------------------------

LpSolution assemble_solution(const LpProblem& p, const Presolve& ps, const Folded& f,
                             const Iterate& w, LpStatus status, int iters, double rel_p,
                             double rel_d, double rel_g) {
  LpSolution sol;
  sol.status = status;
  sol.iterations = iters;
  sol.primal_residual = rel_p;
  sol.dual_residual = rel_d;
  sol.gap = rel_g;
  if (status != LpStatus::Optimal) {
    // keep the (unscaled) dual direction: for infeasible problems it carries
    // the Farkas certificate used to name the binding constraint families
    const Index me = p.num_eq();
    const Index mi = p.num_ineq();
    sol.y_eq = Vec(me);
    sol.y_ineq = Vec(mi);
    for (Index r = 0; r < me; ++r) sol.y_eq[r] = w.y[r] * f.obj_scale * f.row_scale[r];
    for (Index r = 0; r < mi; ++r) sol.y_ineq[r] = w.y[me + r] * f.obj_scale * f.row_scale[me + r];
    return sol;
  }

  const Index n = p.num_vars();
  sol.x = Vec::Zero(n);
  sol.z_lower = Vec::Zero(n);
  sol.z_upper = Vec::Zero(n);
  for (Index j = 0; j < n; ++j) {
    if (ps.removed[j]) sol.x[j] = ps.fixed_value[j];
  }
  for (std::size_t k = 0; k < ps.keep_col.size(); ++k) {
    const Index oj = ps.keep_col[k];
    sol.x[oj] = w.x[static_cast<Index>(k)] * f.col_scale[static_cast<Index>(k)];
    sol.z_lower[oj] = w.zl[static_cast<Index>(k)] * f.obj_scale / f.col_scale[static_cast<Index>(k)];
    sol.z_upper[oj] = w.zu[static_cast<Index>(k)] * f.obj_scale / f.col_scale[static_cast<Index>(k)];
  }
  const Index me = p.num_eq();
  const Index mi = p.num_ineq();
  sol.y_eq = Vec(me);
  sol.y_ineq = Vec(mi);
  for (Index r = 0; r < me; ++r) sol.y_eq[r] = w.y[r] * f.obj_scale * f.row_scale[r];
  for (Index r = 0; r < mi; ++r) sol.y_ineq[r] = w.y[me + r] * f.obj_scale * f.row_scale[me + r];
  // Duals for presolve-fixed columns follow from stationarity of the reduced cost.
  Vec reduced = p.cost;
  for (const auto& t : p.eq) reduced[t.col()] -= t.value() * sol.y_eq[t.row()];
  for (const auto& t : p.ineq) reduced[t.col()] -= t.value() * sol.y_ineq[t.row()];
  for (Index j = 0; j < n; ++j) {
    if (!ps.removed[j]) continue;
    sol.z_lower[j] = std::max(reduced[j], 0.0);
    sol.z_upper[j] = std::max(-reduced[j], 0.0);
  }
  sol.objective = p.cost.dot(sol.x);
  return sol;
}

LpSolution solve_impl(const LpProblem& problem, const SolverOptions& options, const Vec* x_hint) {
  problem.check_consistency();

  Vec eq_rhs = problem.eq_rhs;
  Vec ineq_rhs = problem.ineq_rhs;
  Presolve ps = run_presolve(problem, eq_rhs, ineq_rhs);
  if (ps.decided) {
    LpSolution sol;
    sol.status = ps.status;
    return sol;
  }

  if (ps.keep_col.empty()) {
    // Everything fixed in presolve; rows must already be satisfied.
    LpSolution sol;
    double viol = 0.0;
    for (Index r = 0; r < problem.num_eq(); ++r) viol = std::max(viol, std::abs(eq_rhs[r]));
    for (Index r = 0; r < problem.num_ineq(); ++r) viol = std::max(viol, std::max(0.0, -ineq_rhs[r]));
    if (viol > 1e-9) {
      sol.status = LpStatus::Infeasible;
      return sol;
    }
    sol.status = LpStatus::Optimal;
    sol.x = Vec::Zero(problem.num_vars());
    for (Index j = 0; j < problem.num_vars(); ++j) sol.x[j] = ps.fixed_value[j];
    sol.objective = problem.cost.dot(sol.x);
    sol.y_eq = Vec::Zero(problem.num_eq());
    sol.y_ineq = Vec::Zero(problem.num_ineq());
    sol.z_lower = Vec::Zero(problem.num_vars());
    sol.z_upper = Vec::Zero(problem.num_vars());
    return sol;
  }

  Folded f = fold_problem(problem, ps, eq_rhs, ineq_rhs);
  Ipm ipm(f, options);
  Iterate w;
  if (x_hint) {
    // map the hint through presolve + scaling, then append slack estimates
    Vec xs = Vec::Zero(f.n);
    for (std::size_t k = 0; k < ps.keep_col.size(); ++k) {
      xs[static_cast<Index>(k)] = (*x_hint)[ps.keep_col[k]] / f.col_scale[static_cast<Index>(k)];
    }
    Vec slack_val = f.b - f.A.leftCols(f.n_struct) * xs.head(f.n_struct);
    for (Index r = 0; r < problem.num_ineq(); ++r) {
      xs[f.n_struct + r] = std::max(slack_val[problem.num_eq() + r], 0.0);
    }
    ipm.warm_start_from(w, xs);
  } else {
    ipm.default_start(w);
  }

  int iters = 0;
  double rel_p = 0, rel_d = 0, rel_g = 0;
  LpStatus status = ipm.run(w, iters, rel_p, rel_d, rel_g);
  return assemble_solution(problem, ps, f, w, status, iters, rel_p, rel_d, rel_g);
}

}  // namespace

LpSolution solve_lp(const LpProblem& problem, const SolverOptions& options) {
  return solve_impl(problem, options, nullptr);
}

LpSolution warm_start(const LpProblem& problem, const LpSolution& previous, const SolverOptions& options) {
  if (previous.status != LpStatus::Optimal) {
    return solve_impl(problem, options, nullptr);
  }
  if (previous.x.size() != problem.num_vars()) {
    throw InputError("warm start shape mismatch: previous solution has " +
                     std::to_string(previous.x.size()) + " variables, problem has " +
                     std::to_string(problem.num_vars()));
  }
  return solve_impl(problem, options, &previous.x);
}

}  // namespace fbsopf
