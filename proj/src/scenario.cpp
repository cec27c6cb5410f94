#include "fbsopf/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fbsopf {

using nlohmann::json;

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

void hash_double(std::uint64_t& h, double v) { h = fnv1a64(&v, sizeof(v), h); }
void hash_string(std::uint64_t& h, const std::string& s) { h = fnv1a64(s.data(), s.size(), h); }
void hash_mat(std::uint64_t& h, const Mat& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) hash_double(h, m(r, c));
  }
}

json parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError("malformed JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

template <typename T>
T require(const json& j, const std::string& key, std::vector<std::string>& errors, const T& fallback) {
  if (!j.contains(key)) {
    errors.push_back("missing field '" + key + "'");
    return fallback;
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    errors.push_back("field '" + key + "' has the wrong type");
    return fallback;
  }
}

void raise_if_errors(const std::string& what, const std::vector<std::string>& errors) {
  if (errors.empty()) return;
  std::ostringstream os;
  os << what << " failed validation:";
  for (const auto& e : errors) os << "\n  - " << e;
  throw InputError(os.str());
}

}  // namespace

RadialNetwork load_grid(const std::filesystem::path& path) {
  const json j = parse_file(path);
  std::vector<std::string> errors;

  RadialNetwork net;
  net.name = j.value("name", path.stem().string());
  const json ju = j.value("per_unit", json::object());
  net.per_unit.power_base_va = ju.value("power_base_va", 0.0);
  net.per_unit.voltage_base_v = ju.value("voltage_base_v", 0.0);
  if (!(net.per_unit.power_base_va > 0.0)) errors.push_back("per_unit.power_base_va must be positive");
  if (!(net.per_unit.voltage_base_v > 0.0)) errors.push_back("per_unit.voltage_base_v must be positive");

  if (!j.contains("buses") || !j["buses"].is_array() || j["buses"].empty()) {
    errors.push_back("grid file needs a non-empty 'buses' array");
    raise_if_errors("grid file '" + path.string() + "'", errors);
  }

  // The slack bus is remapped to index 0 regardless of file order.
  std::vector<json> bus_entries(j["buses"].begin(), j["buses"].end());
  std::stable_sort(bus_entries.begin(), bus_entries.end(), [](const json& a, const json& b) {
    return (a.value("kind", "") == "slack") > (b.value("kind", "") == "slack");
  });

  std::map<std::string, Index> label_to_id;
  for (const json& jb : bus_entries) {
    Bus bus;
    bus.id = static_cast<Index>(net.buses.size());
    bus.label = jb.value("label", std::string("bus") + std::to_string(bus.id));
    const std::string kind = jb.value("kind", "load");
    if (kind == "slack") bus.kind = BusKind::Slack;
    else if (kind == "generator") bus.kind = BusKind::Generator;
    else if (kind == "load") bus.kind = BusKind::Load;
    else errors.push_back("bus '" + bus.label + "': unknown kind '" + kind + "'");
    bus.base_voltage_v = jb.value("base_voltage_v", net.per_unit.voltage_base_v);
    if (label_to_id.count(bus.label)) errors.push_back("duplicate bus label '" + bus.label + "'");
    label_to_id[bus.label] = bus.id;
    net.buses.push_back(bus);
  }

  const double z_base = net.per_unit.impedance_base_ohm();
  const double i_base = net.per_unit.current_base_a();
  for (const json& jb : j.value("branches", json::array())) {
    Branch br;
    const std::string from = jb.value("from", "");
    const std::string to = jb.value("to", "");
    br.name = jb.value("name", from + "-" + to);
    auto itf = label_to_id.find(from);
    auto itt = label_to_id.find(to);
    if (itf == label_to_id.end()) {
      errors.push_back("branch '" + br.name + "': unknown bus '" + from + "'");
      continue;
    }
    if (itt == label_to_id.end()) {
      errors.push_back("branch '" + br.name + "': unknown bus '" + to + "'");
      continue;
    }
    br.from_bus = itf->second;
    br.to_bus = itt->second;
    br.resistance_pu = jb.value("r_ohm", 0.0) / z_base;
    br.reactance_pu = jb.value("x_ohm", 0.0) / z_base;
    br.current_limit_pu = jb.value("i_max_a", 0.0) / i_base;
    net.branches.push_back(br);
  }
  raise_if_errors("grid file '" + path.string() + "'", errors);

  ValidationReport report = validate_network(net);
  if (!report.ok()) raise_if_errors("grid file '" + path.string() + "'", report.violations);
  orient_branches(net);
  return net;
}

namespace {

StorageSpec parse_storage(const json& js, const RadialNetwork& net, double base_kw,
                          std::vector<std::string>& errors, const std::string& ctx) {
  StorageSpec s;
  s.name = js.value("name", std::string("storage"));
  const std::string bus = js.value("bus", "");
  try {
    s.bus = net.bus_by_label(bus);
  } catch (const InputError&) {
    errors.push_back(ctx + " storage '" + s.name + "': unknown bus '" + bus + "'");
  }
  s.p_rated = js.value("p_rated_kva", 0.0) / base_kw;
  s.eta_ch = js.value("eta_ch", 1.0);
  s.eta_dis = js.value("eta_dis", 1.0);
  s.e0 = js.value("e0_kwh", 0.0) / base_kw;
  s.e_min = js.value("e_min_kwh", 0.0) / base_kw;
  if (js.contains("e_max_kwh") && js["e_max_kwh"].is_string()) {
    if (js["e_max_kwh"].get<std::string>() == "sizing") {
      s.sizing = true;
      s.e_max = std::numeric_limits<double>::infinity();
    } else {
      errors.push_back(ctx + " storage '" + s.name + "': e_max_kwh must be a number or \"sizing\"");
    }
  } else {
    s.e_max = js.value("e_max_kwh", 0.0) / base_kw;
  }
  s.capacity_cost = js.value("capacity_cost_eur_per_kwh", 0.0) * base_kw;
  s.calendar_life_years = js.value("calendar_life_years", 10.0);
  if (!(s.eta_ch > 0 && s.eta_ch <= 1) || !(s.eta_dis > 0 && s.eta_dis <= 1)) {
    errors.push_back(ctx + " storage '" + s.name + "': efficiencies must be in (0, 1]");
  }
  if (!(s.p_rated > 0)) errors.push_back(ctx + " storage '" + s.name + "': p_rated_kva must be positive");
  return s;
}

}  // namespace

Scenario load_scenario(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override) {
  const json j = parse_file(path);
  std::vector<std::string> errors;
  Scenario sc;

  const int version = j.value("schema_version", 0);
  if (version != 1) errors.push_back("unsupported schema_version " + std::to_string(version));
  sc.name = j.value("name", path.stem().string());

  // the grid is the one dependency everything else needs, so a broken
  // reference is fatal; all other violations keep accumulating
  std::vector<std::string> fatal;
  const std::string grid_ref = require<std::string>(j, "grid", fatal, "");
  raise_if_errors("scenario '" + path.string() + "'", fatal);
  sc.net = load_grid(path.parent_path() / grid_ref);
  const double base_kw = sc.net.per_unit.power_base_va / 1000.0;

  const json jh = j.value("horizon", json::object());
  sc.horizon.steps = jh.value("steps", 1);
  sc.horizon.step_hours = jh.value("step_hours", 1.0);
  if (sc.horizon.steps < 1) errors.push_back("horizon.steps must be >= 1");
  if (!(sc.horizon.step_hours > 0)) errors.push_back("horizon.step_hours must be positive");

  sc.v_slack = j.value("slack_voltage_pu", 1.0);
  const json jv = j.value("voltage_limits_pu", json::object());
  sc.v_min = jv.value("min", 0.9);
  sc.v_max = jv.value("max", 1.1);
  if (!(sc.v_min > 0) || !(sc.v_min < sc.v_max)) errors.push_back("voltage limits need 0 < min < max");
  sc.terminal_soc = j.value("terminal_soc", false);

  const Index n = sc.net.bus_count();
  Vec base_p = Vec::Zero(n);
  Vec base_q = Vec::Zero(n);
  std::vector<Index> load_buses;
  for (const json& jl : j.value("loads", json::array())) {
    const std::string bus = jl.value("bus", "");
    try {
      const Index id = sc.net.bus_by_label(bus);
      base_p[id] = jl.value("p_kw", 0.0) / base_kw;
      base_q[id] = jl.value("q_kvar", 0.0) / base_kw;
      load_buses.push_back(id);
    } catch (const InputError&) {
      errors.push_back("load references unknown bus '" + bus + "'");
    }
  }

  std::vector<Index> pv_gen_indices;
  for (const json& jg : j.value("generators", json::array())) {
    ScenarioGenerator g;
    g.spec.name = jg.value("name", std::string("gen") + std::to_string(sc.generators.size()));
    const std::string bus = jg.value("bus", "");
    try {
      g.spec.bus = sc.net.bus_by_label(bus);
    } catch (const InputError&) {
      errors.push_back("generator '" + g.spec.name + "' references unknown bus '" + bus + "'");
    }
    g.spec.p_min = jg.value("p_min_kw", 0.0) / base_kw;
    g.spec.p_max = jg.value("p_max_kw", 0.0) / base_kw;
    g.spec.q_min = jg.value("q_min_kvar", 0.0) / base_kw;
    g.spec.q_max = jg.value("q_max_kvar", 0.0) / base_kw;
    g.spec.cost = jg.value("price_eur_per_kwh", 0.0) * base_kw;
    g.pv_profile = jg.value("pv_profile", false);
    g.price_profile = jg.value("price_profile", false);
    if (g.spec.p_min > g.spec.p_max) errors.push_back("generator '" + g.spec.name + "' has p_min > p_max");
    if (g.spec.cost < 0) errors.push_back("generator '" + g.spec.name + "' has a negative price");
    if (g.pv_profile) pv_gen_indices.push_back(static_cast<Index>(sc.generators.size()));
    sc.generators.push_back(g);
  }

  for (const json& js : j.value("storages", json::array())) {
    sc.storages.push_back(parse_storage(js, sc.net, base_kw, errors, "active"));
  }
  const json jconfigs = j.value("storage_configs", json::object());
  for (const auto& [cfg_name, arr] : jconfigs.items()) {
    std::vector<StorageSpec> fleet;
    for (const json& js : arr) fleet.push_back(parse_storage(js, sc.net, base_kw, errors, cfg_name));
    sc.storage_configs[cfg_name] = std::move(fleet);
  }

  // Profiles: synthesized, constant, or read from series files.
  const Index N = sc.horizon.steps;
  sc.load_p = Mat::Zero(n, N);
  sc.load_q = Mat::Zero(n, N);
  sc.pv_availability = Mat::Ones(n, N);
  sc.price = Vec::Zero(N);
  double static_price = 0.0;
  for (const auto& g : sc.generators) {
    if (g.price_profile) static_price = g.spec.cost;
  }
  sc.price.setConstant(static_price);

  const json jp = j.value("profiles", json::object());
  if (jp.contains("synth")) {
    const json jsy = jp["synth"];
    sc.seed = jsy.value("seed", 1u);
    if (seed_override) sc.seed = *seed_override;
    const int days = jsy.value("days", 1);
    const double res = jsy.value("resolution_hours", 1.0);
    const Index expect = static_cast<Index>(std::llround(days * 24.0 / res));
    if (expect != N) {
      errors.push_back("synth profiles cover " + std::to_string(expect) + " steps but horizon has " +
                       std::to_string(N));
    } else {
      const int households = static_cast<int>(std::max(load_buses.size(), pv_gen_indices.size()));
      SynthProfiles prof = synth_profiles(sc.seed, days, res, std::max(households, 1));
      for (std::size_t i = 0; i < load_buses.size(); ++i) {
        const Index bus = load_buses[i];
        for (Index k = 0; k < N; ++k) {
          const double m = prof.load_multiplier(k, static_cast<Index>(i));
          sc.load_p(bus, k) = base_p[bus] * m;
          sc.load_q(bus, k) = base_q[bus] * m;
        }
      }
      for (std::size_t i = 0; i < pv_gen_indices.size(); ++i) {
        const Index bus = sc.generators[pv_gen_indices[i]].spec.bus;
        for (Index k = 0; k < N; ++k) sc.pv_availability(bus, k) = prof.pv_availability(k, static_cast<Index>(i));
      }
      sc.price = prof.price_eur_per_kwh * base_kw;
    }
  } else if (jp.contains("files")) {
    const json jf = jp["files"];
    auto read_matrix = [&](const std::string& key, bool required) -> std::pair<Mat, std::vector<std::string>> {
      if (!jf.contains(key)) {
        if (required) errors.push_back("profiles.files." + key + " is required");
        return {Mat(), {}};
      }
      std::vector<std::string> labels;
      Mat m = read_series_csv(path.parent_path() / jf[key].get<std::string>(), labels);
      if (m.rows() != N) {
        errors.push_back("series '" + key + "' has " + std::to_string(m.rows()) + " steps, horizon needs " +
                         std::to_string(N));
      }
      return {std::move(m), std::move(labels)};
    };
    auto [loadm, load_labels] = read_matrix("load", true);
    auto [pvm, pv_labels] = read_matrix("pv", !pv_gen_indices.empty());
    auto [pricem, price_labels] = read_matrix("price", true);
    if (errors.empty()) {
      auto col_of = [&errors](const std::vector<std::string>& labels, const std::string& want,
                              const std::string& what) -> Index {
        auto it = std::find(labels.begin(), labels.end(), want);
        if (it == labels.end()) {
          errors.push_back(what + " series is missing a column for '" + want + "'");
          return -1;
        }
        return static_cast<Index>(it - labels.begin());
      };
      for (Index bus : load_buses) {
        const Index col = col_of(load_labels, sc.net.buses[bus].label, "load");
        if (col < 0) continue;
        for (Index k = 0; k < N; ++k) {
          sc.load_p(bus, k) = base_p[bus] * loadm(k, col);
          sc.load_q(bus, k) = base_q[bus] * loadm(k, col);
        }
      }
      for (Index gi : pv_gen_indices) {
        const Index bus = sc.generators[gi].spec.bus;
        const Index col = col_of(pv_labels, sc.net.buses[bus].label, "pv");
        if (col < 0) continue;
        for (Index k = 0; k < N; ++k) sc.pv_availability(bus, k) = pvm(k, col);
      }
      if (pricem.cols() >= 1 && pricem.rows() == N) {
        for (Index k = 0; k < N; ++k) sc.price[k] = pricem(k, 0) * base_kw;
      }
    }
  } else if (jp.contains("constant")) {
    // base loads and full availability in every period
    for (Index bus : load_buses) {
      for (Index k = 0; k < N; ++k) {
        sc.load_p(bus, k) = base_p[bus];
        sc.load_q(bus, k) = base_q[bus];
      }
    }
  } else {
    errors.push_back("profiles must be one of: synth, files, constant");
  }

  raise_if_errors("scenario '" + path.string() + "'", errors);
  return sc;
}

std::uint64_t Scenario::hash() const {
  std::uint64_t h = 14695981039346656037ull;
  hash_string(h, name);
  hash_string(h, net.name);
  hash_double(h, net.per_unit.power_base_va);
  hash_double(h, net.per_unit.voltage_base_v);
  for (const auto& b : net.branches) {
    hash_double(h, b.resistance_pu);
    hash_double(h, b.reactance_pu);
    hash_double(h, b.current_limit_pu);
    hash_double(h, b.from_bus);
    hash_double(h, b.to_bus);
  }
  hash_double(h, horizon.steps);
  hash_double(h, horizon.step_hours);
  hash_double(h, v_slack);
  hash_double(h, v_min);
  hash_double(h, v_max);
  hash_double(h, terminal_soc ? 1.0 : 0.0);
  for (const auto& g : generators) {
    hash_string(h, g.spec.name);
    hash_double(h, g.spec.bus);
    hash_double(h, g.spec.p_min);
    hash_double(h, g.spec.p_max);
    hash_double(h, g.spec.q_min);
    hash_double(h, g.spec.q_max);
    hash_double(h, g.spec.cost);
    hash_double(h, g.pv_profile ? 1.0 : 0.0);
    hash_double(h, g.price_profile ? 1.0 : 0.0);
  }
  for (const auto& s : storages) {
    hash_string(h, s.name);
    hash_double(h, s.bus);
    hash_double(h, s.p_rated);
    hash_double(h, s.eta_ch);
    hash_double(h, s.eta_dis);
    hash_double(h, s.e0);
    hash_double(h, s.e_min);
    hash_double(h, s.sizing ? -1.0 : s.e_max);
    hash_double(h, s.capacity_cost);
    hash_double(h, s.calendar_life_years);
  }
  hash_mat(h, load_p);
  hash_mat(h, load_q);
  hash_mat(h, pv_availability);
  hash_mat(h, price);
  return h;
}

std::vector<GeneratorSpec> Scenario::generator_specs() const {
  std::vector<GeneratorSpec> out;
  out.reserve(generators.size());
  for (const auto& g : generators) out.push_back(g.spec);
  return out;
}

Mat Scenario::gen_p_max_series() const {
  const Index ng = static_cast<Index>(generators.size());
  Mat caps(ng, horizon.steps);
  for (Index g = 0; g < ng; ++g) {
    for (Index k = 0; k < horizon.steps; ++k) {
      double cap = generators[g].spec.p_max;
      if (generators[g].pv_profile) cap *= pv_availability(generators[g].spec.bus, k);
      caps(g, k) = cap;
    }
  }
  return caps;
}

Mat Scenario::gen_cost_series() const {
  const Index ng = static_cast<Index>(generators.size());
  Mat cost(ng, horizon.steps);
  for (Index g = 0; g < ng; ++g) {
    for (Index k = 0; k < horizon.steps; ++k) {
      cost(g, k) = generators[g].price_profile ? price[k] : generators[g].spec.cost;
    }
  }
  return cost;
}

MultiperiodCase Scenario::multiperiod_case(bool sizing) const {
  MultiperiodCase c;
  c.gens = generator_specs();
  c.fleet = storages;
  if (!sizing) {
    for (const auto& s : c.fleet) {
      if (s.sizing) {
        throw InputError("storage '" + s.name + "' has no fixed e_max; run it in sizing mode");
      }
    }
  }
  c.limits = limits();
  c.horizon = horizon;
  c.v_slack = v_slack;
  c.load_p = load_p;
  c.load_q = load_q;
  c.gen_p_max = gen_p_max_series();
  c.gen_cost = gen_cost_series();
  c.sizing = sizing;
  c.terminal_soc = terminal_soc;
  return c;
}

void Scenario::period_loads(Index k, Vec& p_d, Vec& q_d) const {
  if (k < 0 || k >= horizon.steps) throw InputError("period index out of range");
  p_d = load_p.col(k);
  q_d = load_q.col(k);
}

// ---------------------------------------------------------------------------
// Synthetic profiles.
// ---------------------------------------------------------------------------

namespace {

// splitmix64: tiny, deterministic across platforms
struct Rng {
  std::uint64_t state;
  explicit Rng(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double gauss() {
    // Box-Muller on two fresh uniforms; no cached state so draws stay ordered
    const double u1 = std::max(uniform(), 1e-12);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
};

double bump(double hour, double center, double width) {
  const double d = hour - center;
  return std::exp(-d * d / (2.0 * width * width));
}

}  // namespace

SynthProfiles synth_profiles(std::uint64_t seed, int days, double resolution_hours, int households) {
  if (days < 1) throw InputError("days must be >= 1");
  if (!(resolution_hours > 0)) throw InputError("resolution must be positive");
  if (households < 1) throw InputError("need at least one household");
  const Index N = static_cast<Index>(std::llround(days * 24.0 / resolution_hours));
  const Index H = households;

  Rng rng(seed ^ 0xfb50fULL);
  SynthProfiles out;
  out.load_multiplier = Mat(N, H);
  out.pv_availability = Mat(N, H);
  out.price_eur_per_kwh = Vec(N);

  // fixed per-household parameters
  Vec load_scale(H), pv_jitter(H);
  for (Index h = 0; h < H; ++h) load_scale[h] = 0.75 + 0.5 * rng.uniform();
  for (Index h = 0; h < H; ++h) pv_jitter[h] = 0.95 + 0.08 * rng.uniform();

  Vec clearness(days);
  for (int d = 0; d < days; ++d) clearness[d] = 0.30 + 0.70 * std::pow(rng.uniform(), 0.45);

  double cloud = 0.5;
  for (Index t = 0; t < N; ++t) {
    const double hour = std::fmod(t * resolution_hours, 24.0);
    const int day = static_cast<int>(t * resolution_hours / 24.0);
    const int dow = day % 7;
    const bool weekend = dow >= 5;

    // household demand: morning and evening peaks, weekday variation
    const double shape = 0.12 + 0.30 * bump(hour, 7.3, 1.3) + 0.55 * bump(hour, 19.3, 2.1);
    const double wk = weekend ? 1.12 : 0.97;
    for (Index h = 0; h < H; ++h) {
      const double noise = std::exp(0.18 * rng.gauss());
      out.load_multiplier(t, h) = std::clamp(shape * wk * load_scale[h] * noise, 0.02, 1.5);
    }

    // PV: clear-sky bell shaded by a shared slow cloud process
    cloud = 0.72 * cloud + 0.28 * rng.uniform();
    const double elev = hour > 6.0 && hour < 20.0 ? std::pow(std::sin(M_PI * (hour - 6.0) / 14.0), 1.15) : 0.0;
    const double cd = clearness[std::min(day, days - 1)];
    const double shade = std::clamp(1.0 - 0.9 * cloud * (1.0 - cd), 0.0, 1.0);
    for (Index h = 0; h < H; ++h) {
      const double sample = 1.0 + 0.02 * rng.gauss();
      out.pv_availability(t, h) = std::clamp(elev * cd * shade * pv_jitter[h] * sample, 0.0, 1.0);
    }

    // market price: day/night spread with morning and evening humps
    const double base = 0.032 + 0.020 * bump(hour, 9.0, 2.6) + 0.034 * bump(hour, 19.5, 2.8);
    const double wkp = weekend ? -0.004 : 0.002;
    out.price_eur_per_kwh[t] = std::max(0.015, base + wkp + 0.003 * rng.gauss());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Series CSV I/O.
// ---------------------------------------------------------------------------

void write_series_csv(const std::filesystem::path& path, const std::vector<std::string>& labels,
                      const Mat& values, const std::vector<std::string>& header_notes) {
  if (static_cast<Eigen::Index>(labels.size()) != values.cols()) {
    throw InputError("label count does not match series columns");
  }
  std::ofstream out(path);
  if (!out) throw InputError("cannot write series file: " + path.string());
  for (const auto& note : header_notes) out << "# " << note << "\n";
  out << "step";
  for (const auto& label : labels) out << "," << label;
  out << "\n";
  out.precision(17);  // lossless double round trip
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    out << r;
    for (Eigen::Index c = 0; c < values.cols(); ++c) out << "," << values(r, c);
    out << "\n";
  }
}

Mat read_series_csv(const std::filesystem::path& path, std::vector<std::string>& labels) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open series file: " + path.string());
  std::string line;
  labels.clear();
  std::vector<std::vector<double>> rows;
  bool header_done = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!header_done) {
      if (cells.empty() || cells[0] != "step") {
        throw InputError(path.string() + ": first data line must be a 'step,...' header");
      }
      labels.assign(cells.begin() + 1, cells.end());
      header_done = true;
      continue;
    }
    std::vector<double> row;
    for (std::size_t i = 1; i < cells.size(); ++i) {
      try {
        row.push_back(std::stod(cells[i]));
      } catch (const std::exception&) {
        throw InputError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + cells[i] + "'");
      }
    }
    if (row.size() != labels.size()) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(labels.size()) + " values, got " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  Mat m(static_cast<Index>(rows.size()), static_cast<Index>(labels.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < labels.size(); ++c) m(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  }
  return m;
}

}  // namespace fbsopf
