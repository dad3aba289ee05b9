#include "peierls/band_cache.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <boost/beast/core/detail/base64.hpp>
#include <json.hpp>

#include "peierls/config.hpp"

namespace peierls {

namespace b64 = boost::beast::detail::base64;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "cache format assumes little-endian");

const char* to_string(CacheStatus s) {
  switch (s) {
    case CacheStatus::disabled: return "disabled";
    case CacheStatus::hit: return "hit";
    case CacheStatus::miss: return "miss";
    case CacheStatus::corrupt: return "corrupt";
  }
  return "?";
}

std::string base64_encode(const void* data, std::size_t size) {
  std::string out(b64::encoded_size(size), '\0');
  out.resize(b64::encode(out.data(), data, size));
  return out;
}

std::string base64_decode(const std::string& text) {
  std::string out(b64::decoded_size(text.size()), '\0');
  const auto [written, read] = b64::decode(out.data(), text.data(), text.size());
  std::size_t body = text.size();
  while (body > 0 && text[body - 1] == '=') --body;
  if (read < body) throw NumericalError("band cache: malformed base64 payload");
  out.resize(written);
  return out;
}

namespace {

std::string pack_vectors(const BandStructure& b) {
  std::string bytes;
  for (const auto& v : b.eigenvectors) {
    bytes.append(reinterpret_cast<const char*>(v.data()), sizeof(cplx) * v.size());
  }
  return bytes;
}

}  // namespace

std::string serialize_bands(const CachedBands& c, const std::string& key) {
  const BandStructure& b = c.bands;
  const std::string values(reinterpret_cast<const char*>(b.eigenvalues.data()),
                           sizeof(double) * b.eigenvalues.size());
  const std::string vectors = pack_vectors(b);
  json j{{"format", "peierls-bands/1"},
         {"key", key},
         {"m", b.grid.m_pts()},
         {"n_bands", b.n_bands()},
         {"dimension", b.dimension()},
         {"backend", b.backend},
         {"energy_shift", c.energy_shift},
         {"eigenvalues", base64_encode(values.data(), values.size())},
         {"eigenvectors", base64_encode(vectors.data(), vectors.size())},
         {"checksum", hex64(fnv1a64(values + vectors))}};
  return j.dump();
}

CachedBands deserialize_bands(const std::string& text, const std::string& key) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw NumericalError(std::string("band cache: unreadable entry: ") + e.what());
  }
  try {
    if (j.at("format") != "peierls-bands/1") throw NumericalError("band cache: unknown format");
    if (j.at("key") != key) throw NumericalError("band cache: key mismatch");
    const int m = j.at("m").get<int>();
    const int nb = j.at("n_bands").get<int>();
    const auto dim = j.at("dimension").get<Eigen::Index>();
    const std::string values = base64_decode(j.at("eigenvalues").get<std::string>());
    const std::string vectors = base64_decode(j.at("eigenvectors").get<std::string>());
    if (hex64(fnv1a64(values + vectors)) != j.at("checksum").get<std::string>()) {
      throw NumericalError("band cache: checksum mismatch");
    }
    const std::size_t nodes = static_cast<std::size_t>(m) * m;
    if (values.size() != sizeof(double) * nodes * nb ||
        vectors.size() != sizeof(cplx) * nodes * nb * dim) {
      throw NumericalError("band cache: payload size does not match the header");
    }
    CachedBands c;
    c.energy_shift = j.at("energy_shift").get<double>();
    BandStructure& b = c.bands;
    b.grid = BrillouinGrid(m);
    b.backend = j.at("backend").get<std::string>();
    b.eigenvalues.resize(static_cast<Eigen::Index>(nodes), nb);
    std::memcpy(b.eigenvalues.data(), values.data(), values.size());
    const std::size_t block = sizeof(cplx) * nb * dim;
    for (std::size_t i = 0; i < nodes; ++i) {
      CMatrix v(dim, nb);
      std::memcpy(v.data(), vectors.data() + i * block, block);
      b.eigenvectors.push_back(std::move(v));
    }
    return c;
  } catch (const json::exception& e) {
    throw NumericalError(std::string("band cache: malformed header: ") + e.what());
  }
}

std::optional<std::filesystem::path> BandCache::path_for(const std::string& key) const {
  if (!dir_) return std::nullopt;
  return *dir_ / ("bands-" + key + ".json");
}

std::pair<std::optional<CachedBands>, CacheStatus> BandCache::load(const std::string& key) const {
  const auto p = path_for(key);
  if (!p) return {std::nullopt, CacheStatus::disabled};
  std::ifstream in(*p, std::ios::binary);
  if (!in) return {std::nullopt, CacheStatus::miss};
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return {deserialize_bands(ss.str(), key), CacheStatus::hit};
  } catch (const NumericalError&) {
    return {std::nullopt, CacheStatus::corrupt};
  }
}

void BandCache::store(const std::string& key, const CachedBands& c) const {
  const auto p = path_for(key);
  if (!p) return;
  std::filesystem::create_directories(p->parent_path());
  const auto tmp = p->string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("band cache: cannot write " + tmp);
    out << serialize_bands(c, key);
  }
  std::filesystem::rename(tmp, *p);
}

}  // namespace peierls
