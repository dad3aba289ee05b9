#pragma once

// End-to-end orchestration behind the peierls-lab commands. The
// eps-independent stages (bands, family, frame, hopping) are prepared once;
// each eps is then analyzed with only the metrics that were asked for.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "peierls/band_cache.hpp"
#include "peierls/config.hpp"
#include "peierls/effective_model.hpp"
#include "peierls/frame_builder.hpp"
#include "peierls/magnetic_frame.hpp"
#include "peierls/reference_reduction.hpp"

namespace peierls {

// Stage wrapper: rethrows with "[stage] " prefixed, keeping the error class.
template <class F>
auto run_stage(const char* stage, F&& f) -> decltype(f()) {
  const std::string tag = std::string("[") + stage + "] ";
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(tag + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(tag + e.what());
  } catch (const InvariantError& e) {
    throw InvariantError(tag + e.what());
  }
}

struct Prepared {
  RunConfig config;
  PeriodicModel model;  // calibrated shift
  BandStructure bands;
  CacheStatus cache = CacheStatus::disabled;
  IsolatedFamily family;
  bool resolution_ok = false;
  double delta = 0.0;
  double window_lo = 0.0;  // J^delta = (E- + 2 delta, E+ - 2 delta)
  double window_hi = 0.0;
  FiberFrame fiber_frame;
  WannierFrame wannier;
  HoppingSequence hopping;
  std::map<std::string, double> timings;  // seconds per stage
};

std::string band_cache_key(const RunConfig& c);
Prepared prepare(const RunConfig& c);

struct AnalysisOptions {
  bool operator_norms = true;   // commutator
  bool spectra = true;          // dense H: spectral distance, evolution
  bool invertibility = false;   // Pi_perp-compressed spectrum on the window grid
  bool peierls_residuals = true;
  int invertibility_points = 41;
  int residual_interior = 3;  // |a|, |b| <= this
  int residual_range = 2;     // |a - b| <= this
};

struct EpsilonAnalysis {
  double epsilon = 0.0;
  long flux_quantum = 0;
  // Gram of the phased frame and its correction
  double gram_defect = 0.0;  // ||G^2 - G||
  double gram_half_width = 0.0;
  double gram_min_eigenvalue = 0.0;
  double gram_gap_low = 0.0;   // largest eigenvalue below 1/2
  double gram_gap_high = 0.0;  // smallest eigenvalue above 1/2
  double corrected_idempotency = 0.0;
  double correction_identity_defect = 0.0;  // ||f(G) - I||
  int rank = 0;
  std::optional<double> commutator;
  std::optional<SpectralDistance> spectral;
  int window_count_reference = 0;
  int window_count_effective = 0;
  std::optional<InvertibilityReport> invertibility;
  std::vector<std::pair<double, double>> evolution;  // (t, error)
  std::optional<double> peierls_residual;
  std::optional<double> corrected_residual;
  std::optional<double> covariance_residual;
  std::optional<double> hopping_shift;  // ||m^eps - m^0|| over |d| <= residual_range
  std::map<std::string, double> timings;
};

// Everything an analysis builds, for callers that want more than metrics.
struct EpsilonState {
  ReferenceOperator reference;
  std::optional<MagneticFrame> frame;
  GramSpectrum gram;
  TightFrameCorrection correction;
  MagneticMatrix direct;
  std::optional<EigenSystem> h_eigen;
};

EpsilonAnalysis analyze_epsilon(const Prepared& p, double eps, const AnalysisOptions& o,
                                EpsilonState* state = nullptr);

// Least-squares log-log slope over the entries with eps > 0 and value > 0;
// nullopt with fewer than two such points.
std::optional<double> epsilon_slope(const std::vector<double>& eps, const std::vector<double>& v);

// Commands. Each writes into `out_dir` and returns a summary JSON.
nlohmann::json cmd_bands(const RunConfig& c, const std::filesystem::path& out_dir);
nlohmann::json cmd_frame(const RunConfig& c, const std::filesystem::path& out_dir);
nlohmann::json cmd_effective(const RunConfig& c, const std::filesystem::path& out_dir);
nlohmann::json cmd_compare(const RunConfig& c, const std::filesystem::path& out_dir);
nlohmann::json cmd_evolve(const RunConfig& c, const std::filesystem::path& out_dir);
nlohmann::json cmd_butterfly(const RunConfig& c, const std::filesystem::path& out_dir);

struct CheckResult {
  std::string name;
  std::string status;  // pass | fail | skipped
  std::string detail;
};

struct RunReport {
  std::string config_hash;
  std::string version;
  std::map<std::string, double> timings;
  std::vector<CheckResult> checks;
  nlohmann::json metrics;

  [[nodiscard]] bool ok() const;
  [[nodiscard]] nlohmann::json to_json() const;
};

RunReport cmd_validate(const RunConfig& c, const std::filesystem::path& out_dir);

const char* artifact_version();

// Fixed-precision number formatting shared by every CSV writer.
std::string format_number(double v);

}  // namespace peierls
