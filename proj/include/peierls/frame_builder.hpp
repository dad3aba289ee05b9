#pragma once

// Parseval frames for an isolated Bloch family: per-node canonical tight
// frame sections, Wannier-type synthesis, frame analysis/synthesis and the
// unperturbed hopping sequence.

#include <cstdint>
#include <map>
#include <vector>

#include "peierls/bloch_fibers.hpp"
#include "peierls/common.hpp"
#include "peierls/lattice_torus.hpp"

namespace peierls {

struct FiberFrame {
  int n_b = 0;
  std::vector<CMatrix> sections;  // per node: dim x n_B, columns psi^_p(theta)
  double conditioning = 0.0;      // min over nodes of the smallest nonzero S(theta) eigenvalue
  std::uint64_t seed = 0;         // seed of any random extra trials
};

// Canonical tight frame of {P_B(theta) trial_p}: psi^ = W (W^* W)^{-1/2} on the
// rank-(N+1) part. Throws NumericalError if conditioning < threshold anywhere.
FiberFrame build_fiber_frame(const BandStructure& bands, const IsolatedFamily& family,
                             const CMatrix& trials, double threshold = 1e-6);

// Default recipe: eigenvectors of H(0) for the family's bands, escalating with
// one seeded random trial when the conditioning check fails.
FiberFrame build_default_fiber_frame(const BandStructure& bands, const IsolatedFamily& family,
                                     std::uint64_t seed = 12345);

struct WannierFrame {
  int n_b = 0;
  int radius = 0;  // window radius L
  Supercell box{2, 1};
  std::vector<CVector> samples;  // per p, box-indexed; cells [-M/2, M/2)^2
  std::vector<double> decay_profile;  // max |psi| per shell |g|_inf = r, r = 0..M/2

  // Value at grid coordinates relative to the frame centre; zero outside the box.
  [[nodiscard]] cplx local_value(int p, int u1, int u2) const;
};

WannierFrame synthesize_wannier(const FiberFrame& frame, const BrillouinGrid& grid, int n_s,
                                int radius, double tail_tolerance = 1e-6);

// Translated copy (tau_{-g} psi_p)(x) = psi_p(x - g) on the periodic box.
CVector translated_wannier(const WannierFrame& w, int p, LatticeVector g);

struct FrameCoordinates {
  std::vector<LatticeVector> cells;  // box cells, n1-major
  int n_b = 0;
  CVector coefficients;  // index cell_ordinal * n_b + p
};

FrameCoordinates frame_analysis(const CVector& f, const WannierFrame& w);
CVector frame_synthesis(const FrameCoordinates& c, const WannierFrame& w);

// Box-sized matrix whose columns are all translated frame vectors, same order as
// FrameCoordinates.
CMatrix frame_matrix(const WannierFrame& w);

struct TightFrame {
  CMatrix coefficients;  // f(G), K x K
  CMatrix vectors;       // columns psi_j = sum_i f(G)_{ij} v_i
  int rank = 0;
};

// Canonical tight frame for the span of the columns of v.
TightFrame tighten_frame(const CMatrix& v, double rank_tolerance = 1e-10);

struct FrameBounds {
  double lower = 0.0;
  double upper = 0.0;
};

FrameBounds frame_bounds(const CMatrix& v, double rank_tolerance = 1e-10);

struct HoppingSequence {
  int n = 0;
  int radius = 0;
  std::map<LatticeVector, CMatrix> entries;
  double tail = 0.0;  // max block norm just outside the radius, when known

  [[nodiscard]] CMatrix at(LatticeVector g) const;
  [[nodiscard]] double hermitian_defect() const;
  // Fitted exponent s in |m_g| ~ C <g>^{-s} over the nonzero blocks.
  [[nodiscard]] double decay_exponent() const;
};

// m^_B(theta) = Psi^(theta)^* H_B(theta) Psi^(theta); m_g its torus Fourier coefficient.
HoppingSequence hopping_from_bands(const BandStructure& bands, const IsolatedFamily& family,
                                   const FiberFrame& frame, int radius);

// Smallest radius with all blocks beyond it below `cutoff` in norm (bounded by (M-8)/2).
int hopping_radius(const BandStructure& bands, const IsolatedFamily& family,
                   const FiberFrame& frame, double cutoff = 1e-10);

// Blocks T_{ab} = m_{a-b} on the open window |a|_inf <= L.
CMatrix flat_quantization(const HoppingSequence& m, int window);

// Window cells |g|_inf <= L, n1-major.
std::vector<LatticeVector> window_cells(int window);

}  // namespace peierls
