#pragma once

// Fields, gauges, line phases, triangle fluxes, flux moments and Zak
// translations.
//
// Phase conventions:
//   Lambda^A(x, y)   = exp(-i int_[x,y] A)
//   Omega^B(x, y, z) = exp(-i int_<x,y,z> B)
// The constant part uses the symmetric gauge A = (b/2)(-x2, x1), for which
// int_[x,y] A = (b/2) x^y in closed form. Periodic parts are Fourier
// antiderivatives integrated by composite Gauss-Legendre quadrature.

#include <cstdint>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include "peierls/common.hpp"
#include "peierls/lattice_torus.hpp"

namespace peierls {

// One term value * exp(i <k, x>) of a real periodic function.
struct FourierMode {
  DualVector k;
  cplx value;
};

// Evaluates sum_k value * exp(i <k, x>); the mode list is assumed Hermitian-symmetric.
double evaluate_modes(const std::vector<FourierMode>& modes, Point2 x);

// Throws ConfigError unless mode(-k) = conj(mode(k)) for every k.
void require_hermitian_modes(const std::vector<FourierMode>& modes, const char* what);

struct VectorMode {
  DualVector k;
  cplx a1;
  cplx a2;
};

class PeriodicVectorPotential {
 public:
  PeriodicVectorPotential() = default;
  explicit PeriodicVectorPotential(std::vector<VectorMode> modes) : modes_(std::move(modes)) {}

  [[nodiscard]] const std::vector<VectorMode>& modes() const { return modes_; }
  [[nodiscard]] bool empty() const { return modes_.empty(); }
  [[nodiscard]] Point2 value(Point2 x) const;
  // d A = dA2/dx1 - dA1/dx2, evaluated spectrally.
  [[nodiscard]] double curl(Point2 x) const;
  // Curl as a mode list, for exact mode-wise comparison.
  [[nodiscard]] std::vector<FourierMode> curl_modes() const;
  // int_[x,y] A by `order`-point Gauss-Legendre on panels adapted to the
  // largest wave number along the segment.
  [[nodiscard]] double line_integral(Point2 x, Point2 y, int order = 8) const;
  [[nodiscard]] PeriodicVectorPotential scaled(double s) const;

 private:
  std::vector<VectorMode> modes_;
};

// Solves dA = B for a zero-flux periodic field through A = (-d2 phi, d1 phi),
// Laplacian(phi) = B. Throws ConfigError if the k = 0 mode is nonzero.
PeriodicVectorPotential periodic_potential_from_field(const std::vector<FourierMode>& field_modes);

// Perturbing field B(x) = epsilon * (b + c * sum_k mode_k e^{i<k,x>}).
struct MagneticFieldSpec {
  double epsilon = 0.0;
  double constant_b = 0.0;
  double fluctuation_c = 0.0;
  std::vector<FourierMode> fluctuation_modes;

  void validate() const;
  // B^eps(x) without the epsilon prefactor.
  [[nodiscard]] double unscaled_field(Point2 x) const;
  [[nodiscard]] bool has_fluctuation() const {
    return fluctuation_c != 0.0 && !fluctuation_modes.empty();
  }
  [[nodiscard]] MagneticFieldSpec with_epsilon(double eps) const;
  [[nodiscard]] MagneticFieldSpec constant_part() const;
};

// A = b_lin * (symmetric gauge) + periodic part.
class GaugePotential {
 public:
  GaugePotential() = default;
  GaugePotential(double linear_b, PeriodicVectorPotential periodic)
      : b_(linear_b), periodic_(std::move(periodic)) {}

  // epsilon * (A_sym[b] + c * A_fluct): the perturbing potential.
  static GaugePotential perturbing(const MagneticFieldSpec& spec);
  // The zero-flux background A° from the periodic field modes.
  static GaugePotential background(const std::vector<FourierMode>& field_modes);

  [[nodiscard]] double linear_b() const { return b_; }
  [[nodiscard]] const PeriodicVectorPotential& periodic() const { return periodic_; }
  [[nodiscard]] double line_integral(Point2 x, Point2 y, int order = 8) const;

 private:
  double b_ = 0.0;
  PeriodicVectorPotential periodic_;
};

cplx line_phase(const GaugePotential& a, Point2 x, Point2 y, int order = 8);

// Flux of the full perturbing field epsilon * B^eps through the oriented triangle.
double triangle_flux(const MagneticFieldSpec& spec, Point2 x, Point2 y, Point2 z, int order = 8);
cplx omega(const MagneticFieldSpec& spec, Point2 x, Point2 y, Point2 z, int order = 8);

// Lattice-restricted constant-field phase exp(-i (eps b / 2) x^y).
inline cplx constant_phase(double eps_b, Point2 x, Point2 y) {
  return std::polar(1.0, -0.5 * eps_b * wedge(x, y));
}

// Flux moments of the unscaled field B^eps:
//   Phi_alpha(x, y)      = int_0^1 ds int_0^1 s du B(alpha + s(x - alpha) + u s (y - x))
//   Phi_{alpha,beta}(y)  = int_0^1 ds int_0^1 s du B(alpha + s(beta - alpha) + u s (y - beta))
double flux_moment_phi(const MagneticFieldSpec& spec, Point2 alpha, Point2 x, Point2 y,
                       int order = 8);
double flux_moment_phi2(const MagneticFieldSpec& spec, Point2 alpha, Point2 beta, Point2 y,
                        int order = 8);

// (T_g f)(x) = Lambda~(x, g) f(x - g) on an open box. Values shifted in from
// outside the box are zero; throws ConfigError if |g|_inf >= M.
CVector zak_translate(const CVector& f, const Supercell& box, LatticeVector g,
                      const MagneticFieldSpec& spec);

// Memoized line phases keyed by endpoint grid coordinates (units of 1/n_s).
class PhaseCache {
 public:
  PhaseCache(GaugePotential a, int n_s) : a_(std::move(a)), ns_(n_s) {}
  cplx get(int u1, int u2, int v1, int v2);
  [[nodiscard]] std::size_t size() const;

 private:
  GaugePotential a_;
  int ns_;
  mutable std::mutex mu_;
  std::map<std::tuple<int, int, int, int>, cplx> cache_;
};

// Magnetic boundary conditions on the M x M torus. A constant flux needs
// n = eps b M^2 / (2 pi) to be an integer; functions obey
//   f(y) = chi(Ma) Lambda~_b(y, Ma) f(y - Ma),  chi(Ma) = (-1)^{n a1 a2},
// where only the constant part of the field enters the wrap. Fluctuation
// modes must satisfy k M in Z^2.
class MagneticTorus {
 public:
  MagneticTorus(Supercell box, MagneticFieldSpec spec);

  [[nodiscard]] const Supercell& box() const { return box_; }
  [[nodiscard]] const MagneticFieldSpec& spec() const { return spec_; }
  [[nodiscard]] long flux_quantum() const { return n_; }
  [[nodiscard]] double eps_b() const { return spec_.epsilon * spec_.constant_b; }
  [[nodiscard]] double chi(LatticeVector a) const;

  // Folds grid coordinates into the box and returns the factor relating the
  // value at the unfolded point to the stored value.
  cplx fold(int& u1, int& u2) const;

  // Lambda~^eps(x, y): perturbing phase including any fluctuation.
  [[nodiscard]] cplx lambda(Point2 x, Point2 y) const;

  // Magnetic translation (T_g f)(x) = Lambda~_b(x, g) f(x - g) with the wrap rule.
  [[nodiscard]] CVector translate(const CVector& f, LatticeVector g) const;

 private:
  Supercell box_;
  MagneticFieldSpec spec_;
  GaugePotential pert_;
  long n_ = 0;
};

}  // namespace peierls
