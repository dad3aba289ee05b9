#pragma once

// On-disk cache of calibrated band structures. One JSON file per model hash;
// arrays are base64-encoded little-endian float64 with an FNV-1a checksum.
// Any mismatch (key, shape, checksum, parse) is treated as a miss.

#include <filesystem>
#include <optional>
#include <string>

#include "peierls/bloch_fibers.hpp"

namespace peierls {

struct CachedBands {
  BandStructure bands;
  double energy_shift = 0.0;
};

enum class CacheStatus { disabled, hit, miss, corrupt };
const char* to_string(CacheStatus s);

std::string base64_encode(const void* data, std::size_t size);
std::string base64_decode(const std::string& text);

// Serialized entry; `key` is stored and checked on read.
std::string serialize_bands(const CachedBands& c, const std::string& key);
// Throws NumericalError on any inconsistency.
CachedBands deserialize_bands(const std::string& text, const std::string& key);

class BandCache {
 public:
  explicit BandCache(std::optional<std::filesystem::path> dir) : dir_(std::move(dir)) {}

  [[nodiscard]] std::optional<std::filesystem::path> path_for(const std::string& key) const;
  // Returns the entry and the lookup status; corrupt entries are reported, not used.
  std::pair<std::optional<CachedBands>, CacheStatus> load(const std::string& key) const;
  void store(const std::string& key, const CachedBands& c) const;

 private:
  std::optional<std::filesystem::path> dir_;
};

}  // namespace peierls
