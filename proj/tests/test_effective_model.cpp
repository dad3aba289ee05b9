#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "peierls/effective_model.hpp"
#include "peierls/reference_reduction.hpp"
#include "support.hpp"

using namespace peierls;

namespace {

HoppingSequence random_sequence(int n, int radius, std::mt19937_64& rng) {
  HoppingSequence h;
  h.n = n;
  h.radius = radius;
  for (int a = -radius; a <= radius; ++a) {
    for (int b = -radius; b <= radius; ++b) {
      h.entries[{a, b}] = testsupport::random_matrix(n, n, rng);
    }
  }
  return h;
}

}  // namespace

TEST_SUITE("effective_model") {
  TEST_CASE("zero field assembly is the flat quantization") {
    const auto& r = testsupport::small_reference();
    const MagneticFieldSpec spec = testsupport::constant_field(0.0, 12, 100);
    const MagneticMatrix m = assemble_peierls(r.hopping, spec, CellWindow::open(3));
    CHECK((m.matrix - flat_quantization(r.hopping, 3)).cwiseAbs().maxCoeff() == 0.0);
    for (std::size_t a = 0; a < m.window.size(); ++a) {
      REQUIRE((m.block(a, a) - r.hopping.at({0, 0})).cwiseAbs().maxCoeff() == 0.0);
    }
  }

  TEST_CASE("window bookkeeping") {
    const CellWindow w = CellWindow::open(2);
    CHECK(w.size() == 25);
    CHECK(w.ordinal({-2, -2}) == std::size_t{0});
    CHECK_FALSE(w.ordinal({3, 0}).has_value());
    const auto in = w.interior(1);
    CHECK(std::count(in.begin(), in.end(), true) == 9);
    const CellWindow t = CellWindow::torus(4);
    CHECK(t.size() == 16);
    CHECK(t.is_torus());
  }

  TEST_CASE("lattice phases") {
    const MagneticFieldSpec s = testsupport::constant_field(1.0, 8, 2);
    const LatticeVector a{1, 2}, b{-3, 1};
    CHECK(std::abs(lattice_phase(s, a, b) * lattice_phase(s, b, a) - 1.0) < 1e-15);
    CHECK(std::abs(lattice_phase(s, a, a) - 1.0) < 1e-15);
  }

  TEST_CASE("twisted product") {
    std::mt19937_64 rng(31);
    MagneticFieldSpec spec;
    spec.epsilon = 0.2;
    spec.constant_b = 0.9;
    HoppingSequence unit;
    unit.n = 2;
    unit.entries[{0, 0}] = CMatrix::Identity(2, 2);
    const HoppingSequence s = random_sequence(2, 1, rng);
    const HoppingSequence t = random_sequence(2, 1, rng);
    SUBCASE("identity sequence is the unit") {
      const HoppingSequence u = twisted_product(unit, s, spec);
      for (const auto& [g, blk] : s.entries) REQUIRE((u.at(g) - blk).norm() < 1e-14);
    }
    SUBCASE("a nonzero field breaks commutativity") {
      const HoppingSequence st = twisted_product(s, t, spec);
      const HoppingSequence ts = twisted_product(t, s, spec);
      double diff = 0.0;
      for (const auto& [g, blk] : st.entries) diff = std::max(diff, (blk - ts.at(g)).norm());
      CHECK(diff > 1e-3);
    }
    SUBCASE("assembly is multiplicative on the interior") {
      const int window = 4;
      const CellWindow w = CellWindow::open(window);
      const CMatrix prod = assemble_peierls(s, spec, w).matrix * assemble_peierls(t, spec, w).matrix;
      const MagneticMatrix st = assemble_peierls(twisted_product(s, t, spec), spec, w);
      const auto& cells = w.cells();
      double err = 0.0;
      for (std::size_t a = 0; a < cells.size(); ++a) {
        if (cells[a].sup_norm() > window - 1) continue;
        for (std::size_t c = 0; c < cells.size(); ++c) {
          err = std::max(err, (prod.block(a * 2, c * 2, 2, 2) - st.block(a, c)).cwiseAbs().maxCoeff());
        }
      }
      CHECK(err < 1e-12);
    }
  }

  TEST_CASE("covariance extraction recovers the hopping") {
    const auto& r = testsupport::small_reference();
    const MagneticFieldSpec spec = testsupport::constant_field(0.05, 12, 100);
    const MagneticMatrix m = assemble_peierls(r.hopping, spec, CellWindow::torus(12));
    const CovarianceResult cov = covariance_extract(m, spec, 3, 2);
    CHECK(cov.residual < 1e-13);
    for (const auto& [g, blk] : cov.hopping.entries) REQUIRE((blk - r.hopping.at(g)).norm() < 1e-13);
  }

  TEST_CASE("Harper spectra") {
    const HoppingSequence h = harper_sequence();
    CHECK(h.hermitian_defect() == 0.0);
    const int m = 8;
    const auto rows = harper_butterfly(m, 4);
    CHECK(rows.size() == static_cast<std::size_t>(4 * m * m));
    std::vector<double> zero, expect;
    for (const auto& row : rows) {
      if (row.flux == 0.0) zero.push_back(row.eigenvalue);
      CHECK(std::abs(row.eigenvalue) <= 4.0 + 1e-12);
    }
    for (int j = 0; j < m; ++j) {
      for (int k = 0; k < m; ++k) expect.push_back(2 * std::cos(kTwoPi * j / m) + 2 * std::cos(kTwoPi * k / m));
    }
    std::sort(zero.begin(), zero.end());
    std::sort(expect.begin(), expect.end());
    REQUIRE(zero.size() == expect.size());
    for (std::size_t i = 0; i < zero.size(); ++i) REQUIRE(zero[i] == doctest::Approx(expect[i]).epsilon(1e-12));
    CHECK_THROWS_AS(harper_butterfly(8, 5), ConfigError);
  }

  TEST_CASE("first-order correction") {
    const auto& r = testsupport::small_reference();
    const ReferenceOperator h0 = build_reference(r.model, MagneticFieldSpec{}, 12);
    MagneticFieldSpec none;
    CHECK(first_order_correction(r.wannier, h0.h, none, {0, 0}, {1, 0}).norm() < 1e-15);
    // linear in the field strength
    MagneticFieldSpec one;
    one.constant_b = 1.0;
    MagneticFieldSpec two = one;
    two.constant_b = 2.0;
    const CMatrix c1 = first_order_correction(r.wannier, h0.h, one, {0, 0}, {1, 0});
    const CMatrix c2 = first_order_correction(r.wannier, h0.h, two, {0, 0}, {1, 0});
    CHECK(c1.norm() > 1e-4);
    CHECK((c2 - 2.0 * c1).norm() < 1e-12 * c2.norm());
  }

  TEST_CASE("window spectrum weights") {
    CMatrix m = CMatrix::Zero(2, 2);
    m(0, 0) = 1.0;
    m(1, 1) = 2.0;
    const WindowSpectrum ws = window_spectrum(m, {true, false});
    CHECK(ws.values(0) == doctest::Approx(1.0));
    CHECK(ws.interior_weight(0) == doctest::Approx(1.0));
    CHECK(ws.interior_weight(1) == doctest::Approx(0.0));
  }
}
