#pragma once

// Shared fixtures and independent oracles for the test suites. Oracles here
// must not reuse the library's computation path for the quantity they check.

#include <filesystem>
#include <queue>
#include <random>
#include <vector>

#include "fbsopf/lp.hpp"

namespace fbsopf::test {

inline std::filesystem::path data_dir() { return std::filesystem::path(FBSOPF_DATA_DIR); }

// --- networks ---------------------------------------------------------------

inline RadialNetwork two_bus(double r = 0.1, double x = 0.0, double i_max = 10.0) {
  RadialNetwork net;
  net.per_unit = {100000.0, 230.94010767585033};
  net.buses.push_back({0, BusKind::Slack, net.per_unit.voltage_base_v, "S"});
  net.buses.push_back({1, BusKind::Generator, net.per_unit.voltage_base_v, "B1"});
  net.branches.push_back({0, 1, r, x, i_max, "b0"});
  return net;
}

inline RadialNetwork chain3() {
  RadialNetwork net = two_bus();
  net.buses.push_back({2, BusKind::Load, net.per_unit.voltage_base_v, "B2"});
  net.branches.push_back({1, 2, 0.05, 0.02, 10.0, "b1"});
  return net;
}

inline RadialNetwork star3() {
  RadialNetwork net = two_bus();
  net.buses.push_back({2, BusKind::Load, net.per_unit.voltage_base_v, "B2"});
  net.branches.push_back({0, 2, 0.05, 0.02, 10.0, "b1"});
  return net;
}

// --- graph oracles ----------------------------------------------------------

/// BFS depth of each bus in the undirected branch graph, independent of the
/// BIBC construction.
inline std::vector<int> bfs_depths(const RadialNetwork& net) {
  const Index n = net.bus_count();
  std::vector<std::vector<Index>> adj(n);
  for (const auto& br : net.branches) {
    adj[br.from_bus].push_back(br.to_bus);
    adj[br.to_bus].push_back(br.from_bus);
  }
  std::vector<int> depth(n, -1);
  std::queue<Index> q;
  q.push(0);
  depth[0] = 0;
  while (!q.empty()) {
    Index u = q.front();
    q.pop();
    for (Index v : adj[u]) {
      if (depth[v] < 0) {
        depth[v] = depth[u] + 1;
        q.push(v);
      }
    }
  }
  return depth;
}

/// Branches on the slack->target path found by independent DFS.
inline std::vector<Index> path_branches(const RadialNetwork& net, Index target) {
  const Index n = net.bus_count();
  std::vector<std::vector<std::pair<Index, Index>>> adj(n);
  for (Index b = 0; b < net.branch_count(); ++b) {
    adj[net.branches[b].from_bus].push_back({net.branches[b].to_bus, b});
    adj[net.branches[b].to_bus].push_back({net.branches[b].from_bus, b});
  }
  std::vector<Index> parent(n, -1), via(n, -1);
  std::vector<char> seen(n, 0);
  std::queue<Index> q;
  q.push(0);
  seen[0] = 1;
  while (!q.empty()) {
    Index u = q.front();
    q.pop();
    for (auto [v, b] : adj[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        parent[v] = u;
        via[v] = b;
        q.push(v);
      }
    }
  }
  std::vector<Index> out;
  for (Index u = target; u != 0; u = parent[u]) out.push_back(via[u]);
  return out;
}

// --- brute-force LP oracle --------------------------------------------------

/// Enumerates candidate vertices (all equalities active plus every subset of
/// inequalities/bounds completing a square system) and returns the best
/// feasible objective. Exponential; use only on tiny problems.
inline double brute_force_lp(const LpProblem& p, double feas_tol = 1e-7) {
  const Index n = p.num_vars();
  const Index me = p.num_eq();

  Mat Aeq = Mat::Zero(me, n);
  for (const auto& t : p.eq) Aeq(t.row(), t.col()) += t.value();
  Mat Ain = Mat::Zero(p.num_ineq(), n);
  for (const auto& t : p.ineq) Ain(t.row(), t.col()) += t.value();

  struct Row {
    Vec a;
    double rhs;
  };
  std::vector<Row> candidates;
  for (Index r = 0; r < p.num_ineq(); ++r) candidates.push_back({Ain.row(r).transpose(), p.ineq_rhs[r]});
  for (Index j = 0; j < n; ++j) {
    Vec e = Vec::Zero(n);
    e[j] = 1.0;
    if (std::isfinite(p.lower[j])) candidates.push_back({e, p.lower[j]});
    if (std::isfinite(p.upper[j])) candidates.push_back({e, p.upper[j]});
  }

  const Index need = n - me;
  double best = std::numeric_limits<double>::infinity();
  std::vector<Index> pick(need);

  auto feasible = [&](const Vec& x) {
    for (Index j = 0; j < n; ++j) {
      if (x[j] < p.lower[j] - feas_tol || x[j] > p.upper[j] + feas_tol) return false;
    }
    if (me && (Aeq * x - p.eq_rhs).cwiseAbs().maxCoeff() > feas_tol) return false;
    if (p.num_ineq() && (Ain * x - p.ineq_rhs).maxCoeff() > feas_tol) return false;
    return true;
  };

  auto try_pick = [&]() {
    Mat M(n, n);
    Vec rhs(n);
    M.topRows(me) = Aeq;
    rhs.head(me) = p.eq_rhs;
    for (Index i = 0; i < need; ++i) {
      M.row(me + i) = candidates[pick[i]].a.transpose();
      rhs[me + i] = candidates[pick[i]].rhs;
    }
    Eigen::FullPivLU<Mat> lu(M);
    if (lu.rank() < n) return;
    Vec x = lu.solve(rhs);
    if (feasible(x)) best = std::min(best, p.cost.dot(x));
  };

  // iterate subsets of size `need`
  std::vector<Index> idx(candidates.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<Index>(i);
  std::vector<Index> comb;
  auto rec = [&](auto&& self, std::size_t start) -> void {
    if (static_cast<Index>(comb.size()) == need) {
      for (Index i = 0; i < need; ++i) pick[i] = comb[i];
      try_pick();
      return;
    }
    for (std::size_t i = start; i < candidates.size(); ++i) {
      comb.push_back(static_cast<Index>(i));
      self(self, i + 1);
      comb.pop_back();
    }
  };
  if (need == 0) {
    Eigen::FullPivLU<Mat> lu(Aeq);
    Vec x = lu.solve(p.eq_rhs);
    if (feasible(x)) best = p.cost.dot(x);
  } else {
    rec(rec, 0);
  }
  return best;
}

inline std::mt19937_64 test_rng(std::uint64_t seed = 0xfb50f) { return std::mt19937_64(seed); }

}  // namespace fbsopf::test
