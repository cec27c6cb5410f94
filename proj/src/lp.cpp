#include "fbsopf/lp.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

namespace fbsopf {

const char* var_kind_code(VarKind kind) {
  switch (kind) {
    case VarKind::GenP: return "pg";
    case VarKind::GenQ: return "qg";
    case VarKind::LossP: return "plp";
    case VarKind::LossQ: return "plq";
    case VarKind::Voltage: return "v";
    case VarKind::StorageEnergy: return "e";
    case VarKind::Capacity: return "z";
    case VarKind::Generic: return "x";
  }
  return "?";
}

const char* lp_status_name(LpStatus status) {
  switch (status) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::IterationLimit: return "iteration-limit";
  }
  return "?";
}

std::uint64_t VariableRegistry::key(VarKind kind, Index entity, Index period) {
  return (static_cast<std::uint64_t>(static_cast<std::uint8_t>(kind)) << 56) |
         (static_cast<std::uint64_t>(static_cast<std::uint32_t>(entity)) << 24) |
         static_cast<std::uint64_t>(static_cast<std::uint32_t>(period + 1) & 0xFFFFFF);
}

Index VariableRegistry::add(VarKind kind, Index entity, Index period) {
  auto [it, inserted] = lookup_.emplace(key(kind, entity, period), static_cast<Index>(vars_.size()));
  if (!inserted) {
    throw InputError("variable registered twice: " + std::string(var_kind_code(kind)) + "[" +
                     std::to_string(entity) + "]@" + std::to_string(period));
  }
  vars_.push_back(VarInfo{kind, entity, period});
  return it->second;
}

Index VariableRegistry::find(VarKind kind, Index entity, Index period) const {
  auto it = lookup_.find(key(kind, entity, period));
  if (it == lookup_.end()) {
    throw InputError("unknown variable: " + std::string(var_kind_code(kind)) + "[" +
                     std::to_string(entity) + "]@" + std::to_string(period));
  }
  return it->second;
}

std::optional<Index> VariableRegistry::try_find(VarKind kind, Index entity, Index period) const {
  auto it = lookup_.find(key(kind, entity, period));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::string VariableRegistry::name(Index var) const {
  const VarInfo& v = info(var);
  std::ostringstream os;
  os << var_kind_code(v.kind) << "[" << v.entity << "]@" << v.period;
  return os.str();
}

bool VariableRegistry::same_shape(const VariableRegistry& other) const {
  if (vars_.size() != other.vars_.size()) return false;
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    if (vars_[i].kind != other.vars_[i].kind || vars_[i].entity != other.vars_[i].entity ||
        vars_[i].period != other.vars_[i].period) {
      return false;
    }
  }
  return true;
}

void LpProblem::check_consistency() const {
  const Index n = num_vars();
  if (lower.size() != n || upper.size() != n) throw InputError("bound vectors must match cost size");
  if (vars.size() != 0 && vars.size() != n) throw InputError("variable registry size does not match cost size");
  for (Index j = 0; j < n; ++j) {
    if (std::isnan(lower[j]) || std::isnan(upper[j]) || std::isnan(cost[j])) {
      throw InputError("nan in problem data at column " + std::to_string(j));
    }
  }
  auto check_triplets = [n](const std::vector<Eigen::Triplet<double>>& t, Index rows, const char* what) {
    for (const auto& e : t) {
      if (e.row() < 0 || e.row() >= rows || e.col() < 0 || e.col() >= n) {
        throw InputError(std::string(what) + " triplet out of range");
      }
      if (!std::isfinite(e.value())) throw InputError(std::string(what) + " has non-finite coefficient");
    }
  };
  check_triplets(eq, num_eq(), "equality");
  check_triplets(ineq, num_ineq(), "inequality");
}

double LpSolution::value(const LpProblem& problem, VarKind kind, Index entity, Index period) const {
  if (status != LpStatus::Optimal) throw InputError("no primal values: solution status is not optimal");
  return x[problem.vars.find(kind, entity, period)];
}

double LpSolution::dual_objective(const LpProblem& problem) const {
  double obj = 0.0;
  if (y_eq.size() == problem.num_eq()) obj += problem.eq_rhs.dot(y_eq);
  if (y_ineq.size() == problem.num_ineq()) obj += problem.ineq_rhs.dot(y_ineq);
  for (Index j = 0; j < problem.num_vars(); ++j) {
    if (std::isfinite(problem.lower[j]) && z_lower.size() == problem.num_vars()) obj += problem.lower[j] * z_lower[j];
    if (std::isfinite(problem.upper[j]) && z_upper.size() == problem.num_vars()) obj -= problem.upper[j] * z_upper[j];
  }
  return obj;
}

namespace {

std::string lp_var_name(const LpProblem& p, Index j) {
  if (p.vars.size() == p.num_vars()) {
    std::string n = p.vars.name(j);
    for (char& ch : n) {
      if (ch == '[' || ch == ']' || ch == '@') ch = '_';
    }
    return n;
  }
  return "x" + std::to_string(j);
}

void write_row(std::ostream& os, const LpProblem& p, const std::vector<std::pair<Index, double>>& terms) {
  bool first = true;
  for (const auto& [col, val] : terms) {
    if (val == 0.0) continue;
    if (first) {
      os << (val < 0 ? "- " : "");
      first = false;
    } else {
      os << (val < 0 ? " - " : " + ");
    }
    os << std::abs(val) << " " << lp_var_name(p, col);
  }
  if (first) os << "0 " << lp_var_name(p, 0);
}

}  // namespace

void write_lp_format(const LpProblem& problem, std::ostream& os) {
  problem.check_consistency();
  const double inf = std::numeric_limits<double>::infinity();

  std::vector<std::vector<std::pair<Index, double>>> eq_rows(problem.num_eq());
  for (const auto& t : problem.eq) eq_rows[t.row()].emplace_back(t.col(), t.value());
  std::vector<std::vector<std::pair<Index, double>>> in_rows(problem.num_ineq());
  for (const auto& t : problem.ineq) in_rows[t.row()].emplace_back(t.col(), t.value());

  os << "\\ generated by fbsopf\n";
  os << "Minimize\n obj: ";
  std::vector<std::pair<Index, double>> obj;
  for (Index j = 0; j < problem.num_vars(); ++j) obj.emplace_back(j, problem.cost[j]);
  write_row(os, problem, obj);
  os << "\nSubject To\n";
  for (Index r = 0; r < problem.num_eq(); ++r) {
    os << " e" << r << ": ";
    write_row(os, problem, eq_rows[r]);
    os << " = " << problem.eq_rhs[r] << "\n";
  }
  for (Index r = 0; r < problem.num_ineq(); ++r) {
    os << " i" << r << ": ";
    write_row(os, problem, in_rows[r]);
    os << " <= " << problem.ineq_rhs[r] << "\n";
  }
  os << "Bounds\n";
  for (Index j = 0; j < problem.num_vars(); ++j) {
    const double lo = problem.lower[j];
    const double up = problem.upper[j];
    const std::string nm = lp_var_name(problem, j);
    if (lo == -inf && up == inf) {
      os << " " << nm << " free\n";
    } else if (lo == -inf) {
      os << " -inf <= " << nm << " <= " << up << "\n";
    } else if (up == inf) {
      os << " " << nm << " >= " << lo << "\n";
    } else {
      os << " " << lo << " <= " << nm << " <= " << up << "\n";
    }
  }
  os << "End\n";
}

}  // namespace fbsopf
