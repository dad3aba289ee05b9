#pragma once

// Magnetically phased frames psi~^eps_{g,p} = Lambda~^eps(., g) psi_p(. - g) on the
// magnetic torus, their Gram analysis, and the Theta = Q~^{-1/2} correction
// realized through f(G), f(z) = z^{-1/2} 1_{z > 1/2}:
//   Psi = F f(G),  Psi Psi^* = spectral projection of F F^* (transfer identity).

#include <functional>
#include <optional>
#include <vector>

#include "peierls/common.hpp"
#include "peierls/frame_builder.hpp"
#include "peierls/linalg.hpp"
#include "peierls/magnetic_geometry.hpp"

namespace peierls {

struct MagneticFrame {
  MagneticTorus torus;
  int n_b = 0;
  std::vector<LatticeVector> cells;  // torus cells, n1-major
  CMatrix vectors;                   // box x (cells * n_B), column = ordinal * n_B + p
};

MagneticFrame build_magnetic_frame(const WannierFrame& w, const MagneticTorus& torus);

struct GramSpectrum {
  CMatrix gram;
  EigenSystem eigen;
  int near_one = 0;
  int near_zero = 0;
  double half_width = 0.0;  // max distance of the eigenvalues to {0, 1}
  double c_q = 0.0;         // half_width / eps (0 at eps = 0)
  double idempotency_defect = 0.0;  // ||G^2 - G||
  double min_eigenvalue = 0.0;
};

// Throws NumericalError when an eigenvalue falls in [0.25, 0.75].
GramSpectrum gram_spectrum(const MagneticFrame& frame);

struct TightFrameCorrection {
  CMatrix coefficients;  // f(G)
  CMatrix vectors;       // corrected psi^eps
  int rank = 0;
  double gram_idempotency = 0.0;  // ||G'^2 - G'||
};

TightFrameCorrection tighten_magnetic_frame(const MagneticFrame& frame, const GramSpectrum& gram);

// P v = Psi (Psi^* v)
CVector apply_projection(const TightFrameCorrection& c, const CVector& v);

// ||[H, P]|| by Lanczos on the Hermitian operator i[H, P], optionally compressed
// by a 0/1 site mask.
double projector_commutator_norm(const TightFrameCorrection& c, const SparseC& h,
                                 const std::optional<RVector>& mask = std::nullopt,
                                 int steps = 120);

// max_g ||[P, T_g]|| over the listed translations (constant field).
double zak_commutator_norm(const TightFrameCorrection& c, const MagneticTorus& torus,
                           const std::vector<LatticeVector>& shifts, int steps = 60);

// ||P phi(H) - phi(H)|| with phi(H) from the dense eigensystem of H.
double spectral_flattening_check(const TightFrameCorrection& c, const EigenSystem& h,
                                 const std::function<double(double)>& phi);

}  // namespace peierls
