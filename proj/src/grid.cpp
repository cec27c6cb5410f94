#include "fbsopf/grid.hpp"

#include <algorithm>
#include <queue>
#include <sstream>

namespace fbsopf {

double to_per_unit(double value, double base) {
  if (!(base > 0.0)) throw InputError("per-unit base must be positive");
  return value / base;
}

double from_per_unit(double value, double base) {
  if (!(base > 0.0)) throw InputError("per-unit base must be positive");
  return value * base;
}

Index RadialNetwork::bus_by_label(const std::string& label) const {
  for (const Bus& b : buses) {
    if (b.label == label) return b.id;
  }
  throw InputError("unknown bus label: " + label);
}

std::vector<Index> RadialNetwork::generator_buses() const {
  std::vector<Index> out;
  for (const Bus& b : buses) {
    if (b.kind == BusKind::Generator) out.push_back(b.id);
  }
  return out;
}

namespace {

// BFS from the slack over the undirected branch graph. Returns parent bus per
// bus (-1 for slack and unreached buses) and the branch index used to reach it.
struct TreeScan {
  std::vector<Index> parent;
  std::vector<Index> via_branch;
  Index reached = 0;
};

TreeScan scan_tree(const RadialNetwork& net) {
  const Index n = net.bus_count();
  std::vector<std::vector<std::pair<Index, Index>>> adj(n);  // (neighbor, branch)
  for (Index b = 0; b < net.branch_count(); ++b) {
    const Branch& br = net.branches[b];
    if (br.from_bus < 0 || br.from_bus >= n || br.to_bus < 0 || br.to_bus >= n) continue;
    adj[br.from_bus].emplace_back(br.to_bus, b);
    adj[br.to_bus].emplace_back(br.from_bus, b);
  }
  TreeScan scan;
  scan.parent.assign(n, -1);
  scan.via_branch.assign(n, -1);
  if (n == 0) return scan;
  std::vector<char> seen(n, 0);
  std::queue<Index> q;
  q.push(0);
  seen[0] = 1;
  scan.reached = 1;
  while (!q.empty()) {
    Index u = q.front();
    q.pop();
    for (auto [v, b] : adj[u]) {
      if (seen[v]) continue;
      seen[v] = 1;
      scan.parent[v] = u;
      scan.via_branch[v] = b;
      ++scan.reached;
      q.push(v);
    }
  }
  return scan;
}

}  // namespace

ValidationReport validate_network(const RadialNetwork& net) {
  ValidationReport report;
  auto fail = [&report](const std::string& msg) { report.violations.push_back(msg); };

  const Index n = net.bus_count();
  const Index l = net.branch_count();
  if (n == 0) {
    fail("network has no buses");
    return report;
  }

  Index slack_count = 0;
  for (Index i = 0; i < n; ++i) {
    if (net.buses[i].id != i) fail("bus ids must be contiguous 0..n-1, got " + std::to_string(net.buses[i].id) + " at position " + std::to_string(i));
    if (net.buses[i].kind == BusKind::Slack) ++slack_count;
  }
  if (slack_count != 1) fail("network must have exactly one slack bus, found " + std::to_string(slack_count));
  else if (net.buses[0].kind != BusKind::Slack) fail("slack bus must be at index 0");

  for (Index b = 0; b < l; ++b) {
    const Branch& br = net.branches[b];
    std::ostringstream tag;
    tag << "branch " << b << " (" << br.from_bus << "-" << br.to_bus << ")";
    if (br.from_bus < 0 || br.from_bus >= n || br.to_bus < 0 || br.to_bus >= n) fail(tag.str() + ": endpoint out of range");
    if (br.from_bus == br.to_bus) fail(tag.str() + ": self loop");
    if (br.resistance_pu < 0.0 || br.reactance_pu < 0.0) fail(tag.str() + ": negative impedance");
    if (br.resistance_pu == 0.0 && br.reactance_pu == 0.0) fail(tag.str() + ": zero impedance");
    if (!(br.current_limit_pu > 0.0)) fail(tag.str() + ": current limit must be positive");
  }

  if (l != n - 1) fail("radial network needs l = n-1 branches, got l=" + std::to_string(l) + " for n=" + std::to_string(n));

  if (report.ok() || l == n - 1) {
    TreeScan scan = scan_tree(net);
    if (scan.reached != n) fail("network is disconnected: " + std::to_string(n - scan.reached) + " bus(es) unreachable from slack");
    else if (l != n - 1) fail("cycle detected: connected with more branches than a spanning tree");
  }

  if (!(net.per_unit.power_base_va > 0.0)) fail("power base must be positive");
  if (!(net.per_unit.voltage_base_v > 0.0)) fail("voltage base must be positive");

  return report;
}

std::vector<Index> orient_branches(RadialNetwork& net) {
  ValidationReport report = validate_network(net);
  if (!report.ok()) throw InputError("invalid network: " + report.violations.front());
  TreeScan scan = scan_tree(net);
  for (Index v = 1; v < net.bus_count(); ++v) {
    Branch& br = net.branches[scan.via_branch[v]];
    if (br.to_bus != v) std::swap(br.from_bus, br.to_bus);
  }
  return scan.parent;
}

BibcMatrix build_bibc(const RadialNetwork& net) {
  ValidationReport report = validate_network(net);
  if (!report.ok()) throw InputError("cannot build BIBC for invalid network: " + report.violations.front());

  const Index n = net.bus_count();
  const Index l = net.branch_count();
  TreeScan scan = scan_tree(net);

  BibcMatrix bibc;
  bibc.full = Mat::Zero(l, n);
  // Walk each bus up to the slack, marking every branch on the path.
  for (Index j = 1; j < n; ++j) {
    Index u = j;
    while (u != 0) {
      bibc.full(scan.via_branch[u], j) = 1.0;
      u = scan.parent[u];
    }
  }
  bibc.reduced = bibc.full.rightCols(n - 1);
  return bibc;
}

}  // namespace fbsopf
