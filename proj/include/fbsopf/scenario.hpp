#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>

#include "fbsopf/storage.hpp"

namespace fbsopf {

/// Grid generator plus its scenario roles: whether its active-power cap
/// follows the availability series and whether its price follows the market
/// price series.
struct ScenarioGenerator {
  GeneratorSpec spec;  // per-unit, currency per pu*h
  bool pv_profile = false;
  bool price_profile = false;
};

struct Scenario {
  std::string name;
  RadialNetwork net;
  std::vector<ScenarioGenerator> generators;
  std::vector<StorageSpec> storages;  // active fleet (may be empty)
  std::map<std::string, std::vector<StorageSpec>> storage_configs;
  Horizon horizon;
  double v_slack = 1.0;
  double v_min = 0.9;
  double v_max = 1.1;
  bool terminal_soc = false;
  std::uint64_t seed = 0;  // seed used when profiles are synthesized

  Mat load_p;           // n x N, pu
  Mat load_q;           // n x N, pu
  Mat pv_availability;  // n x N in [0, 1]
  Vec price;            // N, currency per pu*h (already on the power base)

  std::uint64_t hash() const;

  std::vector<GeneratorSpec> generator_specs() const;
  /// Per-period caps for the grid generators (PV availability applied).
  Mat gen_p_max_series() const;
  /// Per-period prices for the grid generators.
  Mat gen_cost_series() const;
  OperatingLimits limits() const { return OperatingLimits::from_network(net, v_min, v_max); }

  MultiperiodCase multiperiod_case(bool sizing) const;
  /// Loads/limits of a single period, for the single-period OPF path.
  void period_loads(Index k, Vec& p_d, Vec& q_d) const;
};

/// Loads a grid file (JSON, SI units) into a per-unit radial network.
RadialNetwork load_grid(const std::filesystem::path& path);

/// Loads and fully validates a scenario file. All violations are collected
/// and reported together; nothing is returned partially. A seed override
/// re-synthesizes the profiles (no effect on file-based profiles).
Scenario load_scenario(const std::filesystem::path& path,
                       std::optional<std::uint64_t> seed_override = std::nullopt);

/// Deterministic synthetic profiles: household load multipliers with morning
/// and evening peaks, clear-sky PV bells with correlated cloud noise, and a
/// day/night market price. Columns are households (identical envelopes,
/// per-household jitter).
struct SynthProfiles {
  Mat load_multiplier;  // N x H, mean around 0.3, peaks near 1
  Mat pv_availability;  // N x H in [0, 1]
  Vec price_eur_per_kwh;  // N, roughly 0.02 .. 0.12
};

SynthProfiles synth_profiles(std::uint64_t seed, int days, double resolution_hours, int households);

/// Series file I/O: '#'-prefixed header lines, then CSV with a leading step
/// column and one column per entity label.
void write_series_csv(const std::filesystem::path& path, const std::vector<std::string>& labels,
                      const Mat& values, const std::vector<std::string>& header_notes = {});
Mat read_series_csv(const std::filesystem::path& path, std::vector<std::string>& labels);

/// FNV-1a over a canonical byte serialization.
std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t h = 14695981039346656037ull);

}  // namespace fbsopf
