#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "peierls/band_cache.hpp"
#include "peierls/config.hpp"
#include "peierls/pipeline.hpp"

using namespace peierls;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json small_config() {
  return json::parse(R"({
    "model": {"potential": {"cosine": 60.0}, "backend": {"kind": "grid", "n_s": 3}, "m_cells": 12},
    "family": {"k0": 1, "n": 0},
    "frame": {"window": 2, "hopping_radius": 2},
    "field": {"epsilons": [0.0], "b_quanta": 100},
    "run": {"times": [0, 1, 2], "butterfly_cells": 8, "butterfly_flux_points": 32}
  })");
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("peierls-test-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t data_rows(const fs::path& csv) {
  std::ifstream in(csv);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  return n - 1;
}

const CheckResult* find_check(const RunReport& r, const std::string& prefix) {
  for (const auto& c : r.checks) {
    if (c.name.rfind(prefix, 0) == 0) return &c;
  }
  return nullptr;
}

}  // namespace

TEST_SUITE("cli_harness") {
  TEST_CASE("config hash ignores key order") {
    const json a = small_config();
    const json b = json::parse(R"({
      "run": {"butterfly_flux_points": 32, "butterfly_cells": 8, "times": [0, 1, 2]},
      "field": {"b_quanta": 100, "epsilons": [0.0]},
      "frame": {"hopping_radius": 2, "window": 2},
      "family": {"n": 0, "k0": 1},
      "model": {"m_cells": 12, "backend": {"n_s": 3, "kind": "grid"}, "potential": {"cosine": 60.0}}
    })");
    CHECK(parse_config(a).hash() == parse_config(b).hash());
    json c = a;
    c["field"]["b_quanta"] = 200;
    CHECK(parse_config(c).hash() != parse_config(a).hash());
    CHECK(hex64(0xabcULL) == "0000000000000abc");
  }

  TEST_CASE("schema and precondition errors") {
    json j = small_config();
    j["model"]["bogus"] = 1;
    CHECK_THROWS_WITH_AS(parse_config(j), doctest::Contains("bogus"), ConfigError);
    j = small_config();
    j["field"]["b"] = 1.0;
    CHECK_THROWS_AS(parse_config(j), ConfigError);
    j = small_config();
    j["field"]["epsilons"] = {0.013};
    CHECK_THROWS_WITH_AS(parse_config(j), doctest::Contains("flux quantum"), ConfigError);
    j = small_config();
    j["frame"]["window"] = 4;
    CHECK_THROWS_WITH_AS(parse_config(j), doctest::Contains("2L + 8"), ConfigError);
    j = small_config();
    j["run"]["butterfly_flux_points"] = 5;
    CHECK_THROWS_AS(parse_config(j), ConfigError);
    j = small_config();
    j["model"]["backend"] = {{"kind", "planewave"}, {"cutoff", 3}};
    j["run"]["commands"] = {"compare"};
    CHECK_THROWS_WITH_AS(parse_config(j), doctest::Contains("grid backend"), ConfigError);
  }

  TEST_CASE("band cache round trip and corruption") {
    const fs::path dir = scratch("cache");
    json j = small_config();
    j["run"]["cache_dir"] = (dir / "cache").string();
    const RunConfig c = parse_config(j);

    const json first = cmd_bands(c, dir / "a");
    CHECK(first["cache"] == "miss");
    const json second = cmd_bands(c, dir / "b");
    CHECK(second["cache"] == "hit");
    CHECK(slurp(dir / "a" / "bands.csv") == slurp(dir / "b" / "bands.csv"));

    const BandCache cache(dir / "cache");
    const fs::path entry = *cache.path_for(band_cache_key(c));
    REQUIRE(fs::exists(entry));
    std::string text = slurp(entry);
    const auto pos = text.find("\"eigenvalues\"");
    REQUIRE(pos != std::string::npos);
    text[text.find('"', pos + 13) + 3] ^= 1;
    std::ofstream(entry, std::ios::binary) << text;
    const json third = cmd_bands(c, dir / "c");
    CHECK(third["cache"] == "corrupt");
    CHECK(slurp(dir / "a" / "bands.csv") == slurp(dir / "c" / "bands.csv"));
    CHECK(cmd_bands(c, dir / "d")["cache"] == "hit");
  }

  TEST_CASE("serialization rejects a wrong key") {
    CachedBands cb;
    PeriodicModel m;
    m.potential_modes = cosine_potential(5.0);
    m.backend = Backend::grid(2);
    cb.bands = compute_bands(m, BrillouinGrid(4), 2);
    const std::string s = serialize_bands(cb, "k1");
    CHECK(deserialize_bands(s, "k1").bands.eigenvalues == cb.bands.eigenvalues);
    CHECK_THROWS_AS(deserialize_bands(s, "k2"), NumericalError);
    CHECK(base64_decode(base64_encode("peierls", 7)) == "peierls");
  }

  TEST_CASE("bands and butterfly tables") {
    const fs::path dir = scratch("tables");
    json j = small_config();
    j["model"] = {{"potential", json::array()}, {"backend", {{"kind", "grid"}, {"n_s", 3}}}, {"m_cells", 8}};
    j["frame"] = {{"window", 0}, {"hopping_radius", 1}};
    j["family"] = {{"k0", 1}, {"n", 2}};
    j["field"] = {{"epsilons", json::array()}};
    j["run"]["commands"] = {"bands", "butterfly"};
    const RunConfig c = parse_config(j);
    CHECK(cmd_bands(c, dir)["rows"] == 256);
    CHECK(data_rows(dir / "bands.csv") == 256);
    CHECK(cmd_butterfly(c, dir)["rows"] == 32 * 64);
    CHECK(data_rows(dir / "butterfly.csv") == 32 * 64);
  }

  TEST_CASE("zero-field evolution is exact") {
    const fs::path dir = scratch("evolve");
    const json out = cmd_evolve(parse_config(small_config()), dir);
    REQUIRE(out["rows"].size() == 3);
    for (const auto& r : out["rows"]) CHECK(r["err"].get<double>() <= 1e-8);
  }

  TEST_CASE("validate reports skipped and failing checks") {
    const fs::path dir = scratch("validate");
    json j = small_config();
    j["field"]["epsilons"] = json::array();
    const RunReport r = cmd_validate(parse_config(j), dir);
    CHECK(r.ok());
    const CheckResult* s = find_check(r, "slope.commutator");
    REQUIRE(s != nullptr);
    CHECK(s->status == "skipped");
    CHECK(fs::exists(dir / "validate.json"));
    CHECK(fs::exists(dir / "timings.json"));

    // a shallow well leaves a frame tail above the guard on M = 12
    j["model"]["potential"] = {{"cosine", 30.0}};
    const RunReport bad = cmd_validate(parse_config(j), dir);
    CHECK_FALSE(bad.ok());
    const CheckResult* f = find_check(bad, "prepare");
    REQUIRE(f != nullptr);
    CHECK(f->status == "fail");
  }

  TEST_CASE("command line exit codes") {
    const fs::path dir = scratch("cli");
    const std::string cli = PEIERLS_CLI_PATH;
    auto run = [&](const std::string& args) {
      const int st = std::system((cli + " " + args + " > /dev/null 2>&1").c_str());
      return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    };
    CHECK(run("bands --config " + (dir / "missing.json").string()) == 2);
    json j = small_config();
    j["model"]["bogus"] = true;
    std::ofstream(dir / "bad.json") << j.dump();
    CHECK(run("bands --config " + (dir / "bad.json").string()) == 2);
    std::ofstream(dir / "good.json") << small_config().dump();
    CHECK(run("bands --config " + (dir / "good.json").string() + " --out " + (dir / "o").string()) == 0);
    CHECK(fs::exists(dir / "o" / "bands.csv"));
  }
}
