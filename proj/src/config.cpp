#include "peierls/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace peierls {

using nlohmann::json;

namespace {

const std::set<std::string> kCommands{"bands",   "frame",     "effective", "compare",
                                      "evolve", "butterfly", "validate"};

void allow_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, _] : obj.items()) {
    bool ok = false;
    for (const char* a : keys) ok = ok || k == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

template <class T>
T get_or(const json& obj, const char* key, const std::string& where, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

int get_int(const json& obj, const char* key, const std::string& where, int fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
  return v.get<int>();
}

std::vector<FourierMode> parse_modes(const json& arr, const std::string& where) {
  if (!arr.is_array()) throw ConfigError(where + ": expected an array of modes");
  std::vector<FourierMode> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string w = where + "[" + std::to_string(i) + "]";
    const json& m = arr[i];
    allow_keys(m, w, {"k", "value"});
    if (!m.contains("k") || !m["k"].is_array() || m["k"].size() != 2) {
      throw ConfigError(w + ".k: expected [k1, k2]");
    }
    FourierMode fm;
    fm.k = {m["k"][0].get<double>(), m["k"][1].get<double>()};
    if (!m.contains("value")) throw ConfigError(w + ".value: missing");
    const json& v = m["value"];
    if (v.is_number()) {
      fm.value = v.get<double>();
    } else if (v.is_array() && v.size() == 2) {
      fm.value = {v[0].get<double>(), v[1].get<double>()};
    } else {
      throw ConfigError(w + ".value: expected a number or [re, im]");
    }
    out.push_back(fm);
  }
  return out;
}

void parse_model(const json& j, RunConfig& c) {
  const std::string w = "model";
  allow_keys(j, w, {"potential", "background_field", "backend", "m_cells", "ground_energy"});
  ModelBlock& m = c.model;
  if (j.contains("potential")) {
    const json& p = j["potential"];
    if (p.is_object()) {
      allow_keys(p, w + ".potential", {"cosine"});
      m.potential_modes = cosine_potential(get_or<double>(p, "cosine", w + ".potential", 0.0));
    } else {
      m.potential_modes = parse_modes(p, w + ".potential");
    }
  }
  if (j.contains("background_field")) {
    m.background_field_modes = parse_modes(j["background_field"], w + ".background_field");
  }
  if (j.contains("backend")) {
    const json& b = j["backend"];
    allow_keys(b, w + ".backend", {"kind", "n_s", "cutoff"});
    const auto kind = get_or<std::string>(b, "kind", w + ".backend", "grid");
    if (kind == "grid") {
      m.backend = Backend::grid(get_int(b, "n_s", w + ".backend", 3));
    } else if (kind == "planewave") {
      m.backend = Backend::planewave(get_int(b, "cutoff", w + ".backend", 4));
    } else {
      throw ConfigError(w + ".backend.kind: expected 'grid' or 'planewave'");
    }
  }
  m.m_cells = get_int(j, "m_cells", w, m.m_cells);
  m.ground_energy = get_or<double>(j, "ground_energy", w, m.ground_energy);
  if (m.m_cells < 4 || m.m_cells % 2 != 0) throw ConfigError("model.m_cells: need an even M >= 4");
}

void parse_family(const json& j, RunConfig& c) {
  allow_keys(j, "family", {"k0", "n", "delta_fraction"});
  c.family.k0 = get_int(j, "k0", "family", c.family.k0);
  c.family.n = get_int(j, "n", "family", c.family.n);
  c.family.delta_fraction = get_or<double>(j, "delta_fraction", "family", c.family.delta_fraction);
  if (c.family.k0 < 1) throw ConfigError("family.k0: band labels start at 1");
  if (c.family.n < 0) throw ConfigError("family.n: must be >= 0");
  if (!(c.family.delta_fraction > 0.0 && c.family.delta_fraction < 0.5)) {
    throw ConfigError("family.delta_fraction: must lie in (0, 1/2)");
  }
}

void parse_frame(const json& j, RunConfig& c) {
  allow_keys(j, "frame", {"seed", "window", "hopping_radius"});
  c.frame.seed = get_or<std::uint64_t>(j, "seed", "frame", c.frame.seed);
  c.frame.window = get_int(j, "window", "frame", c.frame.window);
  c.frame.hopping_radius = get_int(j, "hopping_radius", "frame", c.frame.hopping_radius);
  if (c.frame.window < 0) throw ConfigError("frame.window: must be >= 0");
  if (c.frame.hopping_radius < 1) throw ConfigError("frame.hopping_radius: must be >= 1");
}

void parse_field(const json& j, RunConfig& c) {
  allow_keys(j, "field", {"epsilons", "b", "b_quanta", "c", "modes"});
  FieldBlock& f = c.field;
  f.epsilons = get_or<std::vector<double>>(j, "epsilons", "field", {});
  if (j.contains("b") && j.contains("b_quanta")) {
    throw ConfigError("field: give either b or b_quanta, not both");
  }
  if (j.contains("b_quanta")) {
    // b such that eps = 1 carries this many flux quanta through the M x M torus
    const double m = c.model.m_cells;
    f.constant_b = kTwoPi * get_or<double>(j, "b_quanta", "field", 0.0) / (m * m);
  } else {
    f.constant_b = get_or<double>(j, "b", "field", 0.0);
  }
  f.fluctuation_c = get_or<double>(j, "c", "field", 0.0);
  if (j.contains("modes")) f.fluctuation_modes = parse_modes(j["modes"], "field.modes");
  for (double e : f.epsilons) {
    if (!(e >= 0.0)) throw ConfigError("field.epsilons: values must be >= 0");
  }
}

void parse_run(const json& j, RunConfig& c) {
  allow_keys(j, "run", {"commands", "output_dir", "workers", "cache_dir", "seed", "times",
                        "butterfly_cells", "butterfly_flux_points"});
  RunBlock& r = c.run;
  r.commands = get_or<std::vector<std::string>>(j, "commands", "run", {});
  for (const auto& cmd : r.commands) {
    if (!kCommands.count(cmd)) throw ConfigError("run.commands: unknown command '" + cmd + "'");
  }
  r.output_dir = get_or<std::string>(j, "output_dir", "run", r.output_dir.string());
  r.workers = get_int(j, "workers", "run", r.workers);
  if (j.contains("cache_dir") && !j["cache_dir"].is_null()) {
    r.cache_dir = get_or<std::string>(j, "cache_dir", "run", "");
  }
  r.seed = get_or<std::uint64_t>(j, "seed", "run", r.seed);
  r.times = get_or<std::vector<double>>(j, "times", "run", r.times);
  r.butterfly_cells = get_int(j, "butterfly_cells", "run", r.butterfly_cells);
  r.butterfly_flux_points = get_int(j, "butterfly_flux_points", "run", r.butterfly_flux_points);
  if (r.workers < 1) throw ConfigError("run.workers: must be >= 1");
  for (double t : r.times) {
    if (!(t >= 0.0)) throw ConfigError("run.times: values must be >= 0");
  }
}

// Preconditions that span modules, checked before dispatch.
void cross_check(const RunConfig& c) {
  const PeriodicModel model = c.periodic_model();
  model.validate();
  const int m = c.model.m_cells;
  const auto dim = static_cast<int>(model.fiber_dimension());
  if (c.family.k0 + c.family.n + 1 > dim) {
    throw ConfigError("family: bands k0..k0+N+1 exceed the fiber dimension " + std::to_string(dim));
  }
  // Window and hopping radii only constrain the frame-based commands.
  bool frame_needed = c.run.commands.empty();
  for (const auto& cmd : c.run.commands) frame_needed = frame_needed || (cmd != "bands" && cmd != "butterfly");
  if (frame_needed && m < 2 * c.frame.window + 8) {
    throw ConfigError("frame.window: need M >= 2L + 8 (M = " + std::to_string(m) + ")");
  }
  if (frame_needed && m < 2 * c.frame.hopping_radius + 8) {
    throw ConfigError("frame.hopping_radius: need M >= 2 R_h + 8 (M = " + std::to_string(m) + ")");
  }
  if (c.run.butterfly_cells < 2 || c.run.butterfly_cells % 2 != 0) {
    throw ConfigError("run.butterfly_cells: need an even M >= 2");
  }
  const long m2 = static_cast<long>(c.run.butterfly_cells) * c.run.butterfly_cells;
  if (c.run.butterfly_flux_points < 1 || m2 % c.run.butterfly_flux_points != 0) {
    throw ConfigError("run.butterfly_flux_points: need q | M^2 for torus quantization");
  }
  for (double e : c.field.epsilons) {
    const MagneticFieldSpec s = c.field.spec(e);
    s.validate();
    const double n = e * s.constant_b * m * m / kTwoPi;
    if (std::abs(n - std::round(n)) > 1e-8) {
      throw ConfigError("field: eps = " + std::to_string(e) +
                        " gives a non-integer flux quantum " + std::to_string(n) + " on the torus");
    }
  }
  if (c.model.backend.kind != Backend::Kind::grid) {
    for (const auto& cmd : c.run.commands) {
      if (cmd != "bands" && cmd != "butterfly") {
        throw ConfigError("run.commands: '" + cmd + "' needs the grid backend");
      }
    }
  }
}

}  // namespace

MagneticFieldSpec FieldBlock::spec(double eps) const {
  MagneticFieldSpec s;
  s.epsilon = eps;
  s.constant_b = constant_b;
  s.fluctuation_c = fluctuation_c;
  s.fluctuation_modes = fluctuation_modes;
  return s;
}

PeriodicModel RunConfig::periodic_model() const {
  PeriodicModel m;
  m.potential_modes = model.potential_modes;
  m.background_field_modes = model.background_field_modes;
  m.backend = model.backend;
  return m;
}

std::string RunConfig::hash() const { return canonical_hash(source); }

RunConfig parse_config(const json& j) {
  allow_keys(j, "config", {"model", "family", "frame", "field", "run"});
  RunConfig c;
  c.source = j;
  if (j.contains("model")) parse_model(j["model"], c);
  if (j.contains("family")) parse_family(j["family"], c);
  if (j.contains("frame")) parse_frame(j["frame"], c);
  if (j.contains("field")) parse_field(j["field"], c);
  if (j.contains("run")) parse_run(j["run"], c);
  cross_check(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

std::string canonical_hash(const json& j) { return hex64(fnv1a64(j.dump())); }

std::optional<std::filesystem::path> resolve_cache_dir(const RunConfig& c) {
  if (c.run.cache_dir) return c.run.cache_dir;
  if (const char* env = std::getenv("PEIERLS_CACHE_DIR"); env && *env) return std::filesystem::path(env);
  return std::nullopt;
}

json modes_to_json(const std::vector<FourierMode>& modes) {
  json out = json::array();
  for (const auto& m : modes) {
    out.push_back({{"k", {m.k.k1, m.k.k2}}, {"value", {m.value.real(), m.value.imag()}}});
  }
  return out;
}

}  // namespace peierls
