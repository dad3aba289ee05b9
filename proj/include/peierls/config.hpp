#pragma once

// Run configuration: a single JSON document, validated up front so that
// cross-module preconditions fail before any compute.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "peierls/bloch_fibers.hpp"
#include "peierls/magnetic_geometry.hpp"

namespace peierls {

struct ModelBlock {
  std::vector<FourierMode> potential_modes;
  std::vector<FourierMode> background_field_modes;
  Backend backend = Backend::grid(3);
  int m_cells = 16;
  double ground_energy = 1.0;  // E0 the shift is calibrated to
};

struct FamilyBlock {
  int k0 = 1;
  int n = 0;
  double delta_fraction = 0.125;  // delta = fraction * d0
};

struct FrameBlock {
  std::uint64_t seed = 12345;
  int window = 4;          // L
  int hopping_radius = 4;  // R_h
};

struct FieldBlock {
  std::vector<double> epsilons;
  double constant_b = 0.0;
  double fluctuation_c = 0.0;
  std::vector<FourierMode> fluctuation_modes;

  [[nodiscard]] MagneticFieldSpec spec(double eps) const;
};

struct RunBlock {
  std::vector<std::string> commands;
  std::filesystem::path output_dir = "out";
  int workers = 1;
  std::optional<std::filesystem::path> cache_dir;
  std::uint64_t seed = 1;
  std::vector<double> times{0.0, 1.0, 2.0, 4.0, 10.0};
  int butterfly_cells = 8;
  int butterfly_flux_points = 32;
};

struct RunConfig {
  ModelBlock model;
  FamilyBlock family;
  FrameBlock frame;
  FieldBlock field;
  RunBlock run;
  nlohmann::json source;  // as given, for hashing and reports

  [[nodiscard]] PeriodicModel periodic_model() const;
  [[nodiscard]] std::string hash() const;
};

// Throws ConfigError with the offending key path.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

// FNV-1a 64 of the canonical serialization; object keys are sorted, so the
// value does not depend on key order in the source file.
std::uint64_t fnv1a64(std::string_view bytes);
std::string canonical_hash(const nlohmann::json& j);
std::string hex64(std::uint64_t v);

// Cache directory: the config value, else PEIERLS_CACHE_DIR, else none.
std::optional<std::filesystem::path> resolve_cache_dir(const RunConfig& c);

nlohmann::json modes_to_json(const std::vector<FourierMode>& modes);

}  // namespace peierls
