#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fbsopf {

using Index = std::int32_t;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Thrown on malformed inputs (bad files, dimension mismatches, invalid bases).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BusKind { Slack, Load, Generator };

struct Bus {
  Index id = 0;
  BusKind kind = BusKind::Load;
  double base_voltage_v = 0.0;  // line-to-neutral
  std::string label;            // original name from the grid file, e.g. "R4"
};

/// Branch oriented from `from_bus` (closer to slack) to `to_bus`.
/// Impedances and the current limit are in per-unit on the network base.
struct Branch {
  Index from_bus = 0;
  Index to_bus = 0;
  double resistance_pu = 0.0;
  double reactance_pu = 0.0;
  double current_limit_pu = 0.0;
  std::string name;
};

/// Per-unit base for a balanced three-phase system. Power base is total
/// three-phase VA, voltage base is line-to-neutral volts, so
///   Z_base = 3 V_ln^2 / S   and   I_base = S / (3 V_ln).
struct PerUnitBase {
  double power_base_va = 0.0;
  double voltage_base_v = 0.0;

  double impedance_base_ohm() const { return 3.0 * voltage_base_v * voltage_base_v / power_base_va; }
  double current_base_a() const { return power_base_va / (3.0 * voltage_base_v); }

  double power_to_pu(double watts) const { return watts / checked(power_base_va); }
  double power_from_pu(double pu) const { return pu * checked(power_base_va); }
  double voltage_to_pu(double volts) const { return volts / checked(voltage_base_v); }
  double voltage_from_pu(double pu) const { return pu * checked(voltage_base_v); }
  double current_to_pu(double amps) const { return amps / checked(current_base_a()); }
  double current_from_pu(double pu) const { return pu * checked(current_base_a()); }
  double impedance_to_pu(double ohm) const { return ohm / checked(impedance_base_ohm()); }
  double impedance_from_pu(double pu) const { return pu * checked(impedance_base_ohm()); }

 private:
  static double checked(double base) {
    if (!(base > 0.0)) throw InputError("per-unit base must be positive");
    return base;
  }
};

/// Radial (tree) network rooted at the slack bus, which is always index 0.
struct RadialNetwork {
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  PerUnitBase per_unit;
  std::string name;

  Index bus_count() const { return static_cast<Index>(buses.size()); }
  Index branch_count() const { return static_cast<Index>(branches.size()); }

  Index bus_by_label(const std::string& label) const;

  /// Buses flagged generator-capable in the grid file.
  std::vector<Index> generator_buses() const;
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/// Checks radiality (l = n-1, connected, acyclic), single slack at index 0,
/// impedance and limit signs. Does not throw; violations are reported.
ValidationReport validate_network(const RadialNetwork& net);

/// Bus-injection to branch-current incidence of a radial network.
/// full(b, j) = 1 iff branch b lies on the unique slack->j path.
struct BibcMatrix {
  Mat full;     // l x n
  Mat reduced;  // l x (n-1), slack column removed

  Index branch_count() const { return static_cast<Index>(full.rows()); }
  Index bus_count() const { return static_cast<Index>(full.cols()); }
};

/// Throws InputError if the network fails validation.
BibcMatrix build_bibc(const RadialNetwork& net);

/// Normalizes branch orientation to point away from the slack bus and returns
/// the parent bus of every non-slack bus. Used by validation and BIBC
/// construction; throws if the branch set is not a spanning tree.
std::vector<Index> orient_branches(RadialNetwork& net);

double to_per_unit(double value, double base);
double from_per_unit(double value, double base);

}  // namespace fbsopf
