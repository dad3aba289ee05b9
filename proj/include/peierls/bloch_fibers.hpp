#pragma once

// Fiber operators H(theta), Bloch bands, eigenprojections, isolated families,
// the Bloch-Floquet transforms and the three-block decomposition.
//
// Grid backend: 5-point Laplacian with t = n_s^2 on the n_s x n_s cell torus.
// A link that leaves the cell into the neighbouring cell g picks up
// exp(+i <theta, g>), matching f(x^ + g) = (1/M^2) sum_th e^{i<th,g>} (U f)(th, x^).

#include <optional>
#include <string>
#include <vector>

#include "peierls/common.hpp"
#include "peierls/lattice_torus.hpp"
#include "peierls/magnetic_geometry.hpp"

namespace peierls {

struct Backend {
  enum class Kind { planewave, grid };
  Kind kind = Kind::grid;
  int cutoff_k = 0;  // planewave: modes |gamma*|_inf <= K
  int n_s = 0;       // grid: points per cell edge

  static Backend planewave(int k) { return {Kind::planewave, k, 0}; }
  static Backend grid(int n_s) { return {Kind::grid, 0, n_s}; }
  [[nodiscard]] std::string tag() const;
};

struct PeriodicModel {
  std::vector<FourierMode> potential_modes;         // integer wave vectors
  std::vector<FourierMode> background_field_modes;  // integer, zero mode absent
  Backend backend;
  double energy_shift = 0.0;

  void validate() const;
  [[nodiscard]] double potential(Point2 x) const { return evaluate_modes(potential_modes, x); }
  [[nodiscard]] std::size_t fiber_dimension() const;
};

// mu * (2 cos 2 pi x1 + 2 cos 2 pi x2)
std::vector<FourierMode> cosine_potential(double mu);

struct FiberOperator {
  TorusPoint theta;
  CMatrix matrix;
};

FiberOperator assemble_fiber(const PeriodicModel& model, TorusPoint theta);

// Largest retained free-mode energy of the backend; the resolution guard
// asks for this to exceed 4 E_+.
double free_mode_ceiling(const Backend& backend);
bool resolution_ok(const PeriodicModel& model, double e_plus);

struct BandStructure {
  BrillouinGrid grid{1};
  RMatrix eigenvalues;               // [node][k], ascending per row
  std::vector<CMatrix> eigenvectors;  // per node: dim x n_bands
  std::string backend;

  [[nodiscard]] int n_bands() const { return static_cast<int>(eigenvalues.cols()); }
  [[nodiscard]] Eigen::Index dimension() const { return eigenvectors.at(0).rows(); }
};

BandStructure compute_bands(const PeriodicModel& model, const BrillouinGrid& grid, int n_bands);

// Returns the model with energy_shift set so that min_theta lambda_1 = e0.
PeriodicModel calibrate_energy_shift(const PeriodicModel& model, const BrillouinGrid& grid,
                                     double e0 = 1.0);

// Sum of |v_k><v_k| for 1-based labels k_first..k_last.
CMatrix eigenprojection(const BandStructure& bands, std::size_t node, int k_first, int k_last);

struct IsolatedFamily {
  int k0 = 1;
  int n = 0;
  double e_minus = 0.0;
  double e_plus = 0.0;
  double d0 = 0.0;
  double inner_minus = 0.0;  // min_theta lambda_{k0}
  double inner_plus = 0.0;   // max_theta lambda_{k0+N}
  double ground_energy = 0.0;
  bool mirrored_lower_edge = false;  // k0 = 1

  [[nodiscard]] int size() const { return n + 1; }
  [[nodiscard]] int k_last() const { return k0 + n; }
};

IsolatedFamily detect_isolated_family(const BandStructure& bands, int k0, int n);

// Bloch-Floquet transform on the box: (U f)(theta, x^) = sum_g e^{-i<theta,g>} f(x^ + g).
// The Zak variant multiplies by e^{-i<theta, x^>}.
std::vector<CVector> bloch_floquet_transform(const CVector& f, const Supercell& box,
                                             const BrillouinGrid& grid, bool zak = false);
CVector inverse_bloch_floquet(const std::vector<CVector>& fibers, const Supercell& box,
                              const BrillouinGrid& grid, bool zak = false);

struct ThreeBlocks {
  CMatrix p0, pb, pinf;
  CMatrix h0, hb, hinf;
};

ThreeBlocks three_block_decomposition(const PeriodicModel& model, const BandStructure& bands,
                                      const IsolatedFamily& family, std::size_t node);

}  // namespace peierls
