#pragma once

// Shared fixtures for the unit and acceptance suites.

#include <map>
#include <memory>
#include <random>

#include "peierls/bloch_fibers.hpp"
#include "peierls/frame_builder.hpp"
#include "peierls/magnetic_geometry.hpp"

namespace testsupport {

using namespace peierls;

inline PeriodicModel gapped_model(int n_s = 3, double mu = 30.0) {
  PeriodicModel m;
  m.potential_modes = cosine_potential(mu);
  m.backend = Backend::grid(n_s);
  return m;
}

// Calibrated bands, family, frame and hopping for the cosine model on an M-torus.
struct Reference {
  PeriodicModel model;
  BandStructure bands;
  IsolatedFamily family;
  FiberFrame frame;
  WannierFrame wannier;
  HoppingSequence hopping;
};

inline const Reference& reference(int m, int k0 = 1, int n = 0, int n_s = 3, double mu = 30.0) {
  static std::map<std::tuple<int, int, int, int, double>, std::unique_ptr<Reference>> cache;
  auto& slot = cache[{m, k0, n, n_s, mu}];
  if (!slot) {
    auto r = std::make_unique<Reference>();
    const BrillouinGrid grid(m);
    r->model = calibrate_energy_shift(gapped_model(n_s, mu), grid);
    r->bands = compute_bands(r->model, grid, k0 + n + 1);
    r->family = detect_isolated_family(r->bands, k0, n);
    r->frame = build_default_fiber_frame(r->bands, r->family);
    const int l = (m - 8) / 2;
    r->wannier = synthesize_wannier(r->frame, grid, n_s, l);
    r->hopping = hopping_from_bands(r->bands, r->family, r->frame, l);
    slot = std::move(r);
  }
  return *slot;
}

// Deeper well, so the frame tail is resolved on an M = 12 torus.
inline const Reference& small_reference() { return reference(12, 1, 0, 3, 60.0); }

// Constant field whose eps = 1 value threads `quanta` flux quanta through the M-torus.
inline MagneticFieldSpec constant_field(double eps, int m, double quanta) {
  MagneticFieldSpec s;
  s.epsilon = eps;
  s.constant_b = kTwoPi * quanta / (static_cast<double>(m) * m);
  return s;
}

inline CMatrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  CMatrix a(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) a(i, j) = {g(rng), g(rng)};
  }
  return a;
}

inline CMatrix random_hermitian(Eigen::Index n, std::mt19937_64& rng) {
  const CMatrix a = random_matrix(n, n, rng);
  return 0.5 * (a + a.adjoint());
}

inline CVector random_vector(Eigen::Index n, std::mt19937_64& rng) {
  return random_matrix(n, 1, rng).col(0);
}

// Orthogonal projection onto the span of `k` random vectors.
inline CMatrix random_projection(Eigen::Index n, Eigen::Index k, std::mt19937_64& rng) {
  const Eigen::HouseholderQR<CMatrix> qr(random_matrix(n, k, rng));
  const CMatrix q = qr.householderQ() * CMatrix::Identity(n, k);
  return q * q.adjoint();
}

}  // namespace testsupport
