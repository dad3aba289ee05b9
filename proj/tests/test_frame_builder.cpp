#include <doctest.h>

#include <cmath>
#include <random>

#include "peierls/effective_model.hpp"
#include "peierls/frame_builder.hpp"
#include "peierls/linalg.hpp"
#include "support.hpp"

using namespace peierls;

namespace {

// Band-projected random vector on the box, built fiberwise from band eigenvectors.
CVector band_vector(const BandStructure& b, const Supercell& box, int k_first, int k_last,
                    std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<CVector> fibers;
  for (std::size_t i = 0; i < b.grid.size(); ++i) {
    CVector v = CVector::Zero(b.dimension());
    for (int k = k_first; k <= k_last; ++k) v += cplx{g(rng), g(rng)} * b.eigenvectors[i].col(k - 1);
    fibers.push_back(v);
  }
  return inverse_bloch_floquet(fibers, box, b.grid);
}

}  // namespace

TEST_SUITE("frame_builder") {
  TEST_CASE("rank-one frame is the normalized projection") {
    const auto& r = testsupport::small_reference();
    std::mt19937_64 rng(5);
    const CVector v = testsupport::random_vector(r.bands.dimension(), rng);
    const FiberFrame f = build_fiber_frame(r.bands, r.family, v);
    CHECK(f.n_b == 1);
    for (std::size_t i = 0; i < r.bands.grid.size(); ++i) {
      const CMatrix p = eigenprojection(r.bands, i, 1, 1);
      const CVector pv = p * v;
      REQUIRE((f.sections[i].col(0) - pv / pv.norm()).norm() < 1e-12);
    }
  }

  TEST_CASE("duplicated trials share the weight") {
    const auto& r = testsupport::small_reference();
    std::mt19937_64 rng(6);
    const CVector v = testsupport::random_vector(r.bands.dimension(), rng);
    CMatrix t(v.size(), 2);
    t << v, v;
    const FiberFrame f = build_fiber_frame(r.bands, r.family, t);
    CHECK(f.n_b == 2);
    for (std::size_t i = 0; i < r.bands.grid.size(); ++i) {
      const CMatrix p = eigenprojection(r.bands, i, 1, 1);
      const CVector pv = p * v;
      const CVector expect = pv / (std::sqrt(2.0) * pv.norm());
      REQUIRE((f.sections[i].col(0) - expect).norm() < 1e-12);
      REQUIRE((f.sections[i].col(1) - expect).norm() < 1e-12);
      const CMatrix& s = f.sections[i];
      REQUIRE((s * s.adjoint() - p).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("random trials for a two-band family give a fiber Parseval frame") {
    const BrillouinGrid grid(8);
    const PeriodicModel m = calibrate_energy_shift(testsupport::gapped_model(3, 30.0), grid);
    const BandStructure b = compute_bands(m, grid, 4);
    const IsolatedFamily fam = detect_isolated_family(b, 2, 1);
    std::mt19937_64 rng(7);
    const FiberFrame f = build_fiber_frame(b, fam, testsupport::random_matrix(b.dimension(), 3, rng));
    CHECK(f.n_b == 3);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const CMatrix p = eigenprojection(b, i, 2, 3);
      REQUIRE((f.sections[i] * f.sections[i].adjoint() - p).cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  TEST_CASE("Wannier synthesis: Plancherel, translation and decay") {
    const auto& r = testsupport::reference(16);
    const WannierFrame& w = r.wannier;
    double fiber_norm = 0.0;
    for (const auto& s : r.frame.sections) fiber_norm += s.col(0).squaredNorm();
    fiber_norm *= r.bands.grid.weight();
    CHECK(w.samples[0].squaredNorm() == doctest::Approx(fiber_norm).epsilon(1e-12));

    // Sections times character(theta, alpha) synthesize psi(x - alpha).
    const LatticeVector alpha{1, 0};
    FiberFrame shifted = r.frame;
    for (std::size_t i = 0; i < shifted.sections.size(); ++i) {
      shifted.sections[i] *= character(r.bands.grid.node(i), alpha);
    }
    const WannierFrame ws = synthesize_wannier(shifted, r.bands.grid, 3, w.radius);
    CHECK((ws.samples[0] - translated_wannier(w, 0, alpha)).norm() < 1e-13);

    // reference-model decay baseline at shell 6
    CHECK(w.decay_profile[6] <= 1e-6 * w.decay_profile[0]);
    CHECK_THROWS_AS(synthesize_wannier(r.frame, r.bands.grid, 3, 5), ConfigError);
  }

  TEST_CASE("frame analysis and synthesis") {
    const auto& r = testsupport::small_reference();
    const WannierFrame& w = r.wannier;
    std::mt19937_64 rng(9);
    SUBCASE("reproducing on the subspace") {
      const CVector f = translated_wannier(w, 0, {2, -1});
      CHECK((frame_synthesis(frame_analysis(f, w), w) - f).norm() < 1e-10);
    }
    SUBCASE("orthogonal complement gives zero coordinates") {
      const CVector f = band_vector(r.bands, w.box, 2, 2, rng);
      CHECK(frame_analysis(f, w).coefficients.cwiseAbs().maxCoeff() < 1e-8 * f.norm());
    }
    SUBCASE("Parseval against the band projection") {
      const CVector f = testsupport::random_vector(w.box.size(), rng);
      auto fib = bloch_floquet_transform(f, w.box, r.bands.grid);
      for (std::size_t i = 0; i < fib.size(); ++i) fib[i] = eigenprojection(r.bands, i, 1, 1) * fib[i];
      const CVector pf = inverse_bloch_floquet(fib, w.box, r.bands.grid);
      CHECK(frame_analysis(f, w).coefficients.squaredNorm() ==
            doctest::Approx(pf.squaredNorm()).epsilon(1e-10));
    }
  }

  TEST_CASE("tighten_frame and frame_bounds") {
    SUBCASE("duplicated vector") {
      CMatrix v(2, 2);
      v << 1, 1, 0, 0;
      const TightFrame t = tighten_frame(v);
      CHECK(t.rank == 1);
      CHECK(std::abs(t.vectors(0, 0) - 1.0 / std::sqrt(2.0)) < 1e-14);
      CHECK(std::abs(t.vectors(0, 1) - 1.0 / std::sqrt(2.0)) < 1e-14);
      const CMatrix g = t.vectors.adjoint() * t.vectors;
      CHECK((g - CMatrix::Constant(2, 2, 0.5)).cwiseAbs().maxCoeff() < 1e-14);
      const FrameBounds fb = frame_bounds(v);
      CHECK(fb.lower == doctest::Approx(2.0));
      CHECK(fb.upper == doctest::Approx(2.0));
    }
    SUBCASE("orthonormal input is a fixed point") {
      std::mt19937_64 rng(2);
      const Eigen::HouseholderQR<CMatrix> qr(testsupport::random_matrix(5, 3, rng));
      const CMatrix q = qr.householderQ() * CMatrix::Identity(5, 3);
      CHECK((tighten_frame(q).vectors - q).cwiseAbs().maxCoeff() < 1e-13);
      const FrameBounds fb = frame_bounds(q);
      CHECK(fb.lower == doctest::Approx(1.0));
      CHECK(fb.upper == doctest::Approx(1.0));
    }
    SUBCASE("three random vectors in C^2") {
      std::mt19937_64 rng(4);
      const TightFrame t = tighten_frame(testsupport::random_matrix(2, 3, rng));
      const CMatrix g = t.vectors.adjoint() * t.vectors;
      CHECK((g * g - g).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(std::abs(g.trace() - 2.0) < 1e-12);
      const FrameBounds fb = frame_bounds(t.vectors);
      CHECK(std::abs(fb.lower - 1.0) < 1e-12);
      CHECK(std::abs(fb.upper - 1.0) < 1e-12);
    }
  }

  TEST_CASE("hopping sequence") {
    const auto& r = testsupport::small_reference();
    const HoppingSequence& m = r.hopping;
    CHECK(m.hermitian_defect() < 1e-13);
    // trace(m_0) is the grid average of the family band
    CHECK(std::abs(m.at({0, 0}).trace() - r.bands.eigenvalues.col(0).mean()) < 1e-10);
    CHECK(m.decay_exponent() > 2.0);

    SUBCASE("flat band reduces to the identity matrix") {
      BandStructure flat = r.bands;
      flat.eigenvalues.col(0).setConstant(2.5);
      const HoppingSequence h = hopping_from_bands(flat, r.family, r.frame, 2);
      for (const auto& [g, blk] : h.entries) {
        const double want = (g.n1 == 0 && g.n2 == 0) ? 2.5 : 0.0;
        REQUIRE(std::abs(blk(0, 0) - want) < 1e-12);
      }
    }
  }

  TEST_CASE("flat quantization") {
    HoppingSequence d;
    d.n = 2;
    d.radius = 0;
    d.entries[{0, 0}] = CMatrix::Identity(2, 2) * 3.0;
    const CMatrix t = flat_quantization(d, 2);
    CHECK((t - 3.0 * CMatrix::Identity(t.rows(), t.cols())).cwiseAbs().maxCoeff() == 0.0);

    const auto& r = testsupport::reference(16);
    const int window = 8;
    const CMatrix q = flat_quantization(r.hopping, window);
    CHECK(hermiticity_defect(q) < 1e-13);
    // Interior states stay inside the band range of the symbol.
    const double lo = r.bands.eigenvalues.col(0).minCoeff();
    const double hi = r.bands.eigenvalues.col(0).maxCoeff();
    const double tol = 2.0 * r.hopping.tail * 81 + 1e-9;
    const auto cells = window_cells(window);
    std::vector<bool> mask;
    for (const auto& g : cells) mask.push_back(g.sup_norm() <= window / 2);
    const WindowSpectrum ws = window_spectrum(q, mask);
    for (Eigen::Index i = 0; i < ws.values.size(); ++i) {
      if (ws.interior_weight(i) < 0.9) continue;
      CHECK(ws.values(i) >= lo - tol);
      CHECK(ws.values(i) <= hi + tol);
    }
  }
}
