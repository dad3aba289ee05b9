#pragma once

// Exact truncated reference operator, Feshbach-Schur reduction, spectral
// comparison, propagation and the quasi-analytic extension.

#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "peierls/bloch_fibers.hpp"
#include "peierls/common.hpp"
#include "peierls/effective_model.hpp"
#include "peierls/linalg.hpp"
#include "peierls/magnetic_frame.hpp"
#include "peierls/magnetic_geometry.hpp"

namespace peierls {

enum class Boundary { torus, open };

struct ReferenceOperator {
  Supercell box{2, 1};
  MagneticFieldSpec spec;
  Boundary boundary = Boundary::torus;
  long flux_quantum = 0;
  double energy_shift = 0.0;
  SparseC h;
};

// 5-point stencil with links -t Lambda°(x,y) Lambda~^eps(x,y) on the M x M box,
// diagonal 4t + W + shift. Torus boundary uses the magnetic wrap rule.
ReferenceOperator build_reference(const PeriodicModel& model, const MagneticFieldSpec& spec,
                                  int m_cells, Boundary boundary = Boundary::torus);

// Orthonormal basis of range(P) (eigenvalues > 1/2) and its complement.
struct ProjectionBasis {
  CMatrix range;
  CMatrix complement;
};
ProjectionBasis projection_basis(const CMatrix& pi);

struct SchurBlocks {
  CMatrix r_perp;   // (Pi_perp (H - l) Pi_perp)^{-1} on range Pi_perp, full-space
  CMatrix r_tilde;  // (Pi H Pi - Pi H R_perp H Pi - l Pi)^{-1} on range Pi, full-space
  CMatrix inverse;  // assembled 2 x 2 block inverse of H - l
};

// Throws NumericalError naming lambda and the nearest point of sigma(Pi_perp H Pi_perp).
SchurBlocks schur_resolvent(const CMatrix& h, const CMatrix& pi, cplx lambda,
                            double tolerance = 1e-12);

// Real t in J where the Schur complement S(t) is singular, found by bisection
// on each monotone branch between poles of R_perp.
std::vector<double> schur_singular_points(const CMatrix& h, const CMatrix& pi, double lo,
                                          double hi, double tolerance = 1e-12);

struct InvertibilityReport {
  double sup_norm = 0.0;
  std::vector<double> failures;  // t with dist(t, sigma(H_perp)) below threshold
};

// sup_t ||(Pi_perp (H - t) Pi_perp)^{-1}|| over the t grid, using the spectrum of the
// compressed operator.
InvertibilityReport window_invertibility(const CMatrix& h, const CMatrix& pi,
                                         const std::vector<double>& t_grid,
                                         double blowup = 1e10);
InvertibilityReport window_invertibility(const CMatrix& h, const TightFrameCorrection& c,
                                         const std::vector<double>& t_grid,
                                         double blowup = 1e10);

struct SpectralDistance {
  double value = 0.0;
  bool empty = false;
};

// max of the two one-sided sups, each over points of one spectrum inside J.
SpectralDistance spectral_distance(const std::vector<double>& s1, const std::vector<double>& s2,
                                   double lo, double hi);

CVector propagate(const EigenSystem& h, const CVector& v, double t);
CVector propagate(const SparseC& h, const CVector& v, double t, double tol = 1e-13);

// Gershgorin enclosure of the spectrum.
std::pair<double, double> spectral_enclosure(const SparseC& h);

struct EvolutionRecord {
  std::vector<double> times;
  double epsilon = 0.0;
  std::vector<double> errors;  // per time
};

// Error between e^{-itH} v and Psi e^{-itM} Psi^* v + (1 - Psi Psi^*) v for a
// seeded random v in range E_J(H).
EvolutionRecord evolution_error_curve(const EigenSystem& h, const CMatrix& m_eff,
                                      const TightFrameCorrection& c, double lo, double hi,
                                      const std::vector<double>& times, double epsilon,
                                      std::uint64_t seed = 1);

// Smooth cutoff: 1 on |y| <= 1, 0 on |y| >= 2.
double hs_cutoff(double y);
double hs_cutoff_derivative(double y);

struct QuasiAnalyticValue {
  cplx value;
  cplx dbar;
};

// phi_hat_{t,N}(x+iy) = sum_{k<=N} (d^k phi_t)(x) (iy)^k / k! chi(y), phi_t(s) = e^{-its} phi(s),
// with d/dzbar = (1/2)(d/dx + i d/dy) evaluated by the closed form. Derivatives of
// phi come from `derivative(k, s)` when given, otherwise from 5-point differences
// (k <= 4, so N <= 3).
QuasiAnalyticValue quasi_analytic_extension(
    const std::function<double(double)>& phi, double t, int n, cplx z,
    const std::function<double(int, double)>& derivative = nullptr, double step = 1e-3);

// k-th derivative of phi_t at x by the product rule.
cplx phi_t_derivative(const std::function<double(double)>& phi,
                      const std::function<double(int, double)>& derivative, double t, int k,
                      double x, double step = 1e-3);

}  // namespace peierls
