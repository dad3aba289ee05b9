#include <doctest.h>

#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <random>

#include "peierls/magnetic_geometry.hpp"
#include "support.hpp"

using namespace peierls;

namespace {

std::vector<FourierMode> wavy_modes() {
  return {{{1, 0}, {0.5, 0}}, {{-1, 0}, {0.5, 0}}, {{1, 1}, {0.1, 0.2}}, {{-1, -1}, {0.1, -0.2}}};
}

MagneticFieldSpec wavy_field(double eps) {
  MagneticFieldSpec s;
  s.epsilon = eps;
  s.constant_b = 0.7;
  s.fluctuation_c = 0.5;
  s.fluctuation_modes = wavy_modes();
  return s;
}

// Duffy-mapped tensor Gauss rule, independent of the library quadrature.
template <class F>
double triangle_integral(F&& f, Point2 x, Point2 y, Point2 z) {
  using boost::math::quadrature::gauss;
  const double det = std::abs(wedge(y - x, z - x));
  return det * gauss<double, 30>::integrate(
                   [&](double s) {
                     return s * gauss<double, 30>::integrate(
                                    [&](double u) { return f(x + s * (y - x) + (u * s) * (z - y)); },
                                    0.0, 1.0);
                   },
                   0.0, 1.0);
}

Point2 random_point(std::mt19937_64& rng, double r) {
  std::uniform_real_distribution<double> u(-r, r);
  return {u(rng), u(rng)};
}

}  // namespace

TEST_SUITE("magnetic_geometry") {
  TEST_CASE("constant-field line phases") {
    MagneticFieldSpec s;
    s.epsilon = 1.0;
    s.constant_b = 1.0;
    const GaugePotential a = GaugePotential::perturbing(s);
    CHECK(std::abs(line_phase(a, {0, 0}, {1, 1}) - 1.0) < 1e-15);
    CHECK(std::abs(line_phase(a, {1, 0}, {0, 1}) - std::polar(1.0, -0.5)) < 1e-15);
    CHECK(triangle_flux(s, {0, 0}, {1, 0}, {0, 1}) == doctest::Approx(0.5));
    CHECK(std::abs(omega(s, {0, 0}, {1, 0}, {0, 1}) - std::polar(1.0, -0.5)) < 1e-14);
    CHECK(std::abs(constant_phase(1.0, {1, 0}, {0, 1}) - std::polar(1.0, -0.5)) < 1e-15);
  }

  TEST_CASE("Stokes with a fluctuating field") {
    const MagneticFieldSpec s = wavy_field(0.3);
    const GaugePotential a = GaugePotential::perturbing(s);
    std::mt19937_64 rng(11);
    for (int i = 0; i < 50; ++i) {
      const Point2 x = random_point(rng, 3), y = random_point(rng, 3), z = random_point(rng, 3);
      const cplx loop = line_phase(a, x, y) * line_phase(a, y, z) * line_phase(a, z, x);
      REQUIRE(std::abs(loop - omega(s, x, y, z)) < 1e-11);
      const double oracle =
          s.epsilon * triangle_integral([&](Point2 p) { return s.unscaled_field(p); }, x, y, z);
      const double sign = wedge(y - x, z - x) >= 0 ? 1.0 : -1.0;
      REQUIRE(triangle_flux(s, x, y, z) == doctest::Approx(sign * oracle).epsilon(1e-10));
    }
  }

  TEST_CASE("unit modulus and antisymmetry") {
    const MagneticFieldSpec s = wavy_field(0.8);
    const GaugePotential a = GaugePotential::perturbing(s);
    std::mt19937_64 rng(12);
    for (int i = 0; i < 20; ++i) {
      const Point2 x = random_point(rng, 5), y = random_point(rng, 5);
      REQUIRE(std::abs(std::abs(line_phase(a, x, y)) - 1.0) < 1e-15);
      REQUIRE(std::abs(line_phase(a, x, y) * line_phase(a, y, x) - 1.0) < 1e-13);
    }
  }

  TEST_CASE("background potential reproduces its field") {
    const std::vector<FourierMode> modes = wavy_modes();
    const GaugePotential a = GaugePotential::background(modes);
    std::mt19937_64 rng(13);
    for (int i = 0; i < 20; ++i) {
      const Point2 x = random_point(rng, 2);
      REQUIRE(a.periodic().curl(x) == doctest::Approx(evaluate_modes(modes, x)).epsilon(1e-12));
    }
    std::vector<FourierMode> bad = modes;
    bad.push_back({{0, 0}, {1.0, 0}});
    CHECK_THROWS_AS(GaugePotential::background(bad), ConfigError);
  }

  TEST_CASE("flux moments") {
    MagneticFieldSpec s;
    s.epsilon = 0.1;
    s.constant_b = 2.0;
    CHECK(flux_moment_phi(s, {0, 0}, {1, 2}, {-3, 1}) == doctest::Approx(1.0));
    CHECK(flux_moment_phi2(s, {0, 0}, {1, 2}, {-3, 1}) == doctest::Approx(1.0));

    // Fluctuating field against the independent tensor Gauss rule.
    const MagneticFieldSpec w = wavy_field(0.1);
    using boost::math::quadrature::gauss;
    const Point2 al{0.2, -0.4}, x{1.3, 0.5}, y{-0.7, 1.9};
    const double oracle = gauss<double, 30>::integrate(
        [&](double t) {
          return t * gauss<double, 30>::integrate(
                         [&](double u) { return w.unscaled_field(al + t * (x - al) + (u * t) * (y - x)); },
                         0.0, 1.0);
        },
        0.0, 1.0);
    CHECK(flux_moment_phi(w, al, x, y) == doctest::Approx(oracle).epsilon(1e-10));
    CHECK(flux_moment_phi(w, al, x, y, 16) == doctest::Approx(flux_moment_phi(w, al, x, y, 8)).epsilon(1e-9));
  }

  TEST_CASE("Zak translations obey the cocycle") {
    MagneticFieldSpec s;
    s.epsilon = 0.05;
    s.constant_b = 1.3;
    const Supercell box(10, 2);
    std::mt19937_64 rng(14);
    CVector f = CVector::Zero(box.size());
    for (Eigen::Index i = 0; i < box.size(); ++i) {
      if (box.cell(i).sup_norm() <= 1) f(i) = {std::normal_distribution<double>()(rng), 0.3};
    }
    const LatticeVector al{1, 0}, be{1, 2};
    const CVector lhs = zak_translate(zak_translate(f, box, be, s), box, al, s);
    const CVector rhs = zak_translate(f, box, al + be, s);
    const cplx factor = std::polar(1.0, 0.5 * s.epsilon * s.constant_b * wedge(to_point(al), to_point(be)));
    CHECK((lhs - factor * rhs).norm() < 1e-12 * f.norm());
    CHECK_THROWS_AS(zak_translate(f, box, {10, 0}, s), ConfigError);
  }

  TEST_CASE("magnetic torus quantization and translations") {
    const Supercell box(8, 2);
    CHECK_THROWS_AS(MagneticTorus(box, testsupport::constant_field(0.5, 8, 3)), ConfigError);
    const MagneticTorus t(box, testsupport::constant_field(1.0, 8, 3));
    CHECK(t.flux_quantum() == 3);
    CHECK(t.chi({1, 1}) == -1.0);
    CHECK(t.chi({2, 1}) == 1.0);
    // Translations preserve the wrap rule when n g / M is integral: n = 4, M = 8, g even.
    const MagneticTorus t4(box, testsupport::constant_field(1.0, 8, 4));
    std::mt19937_64 rng(15);
    const CVector f = testsupport::random_vector(box.size(), rng);
    const LatticeVector al{2, -4}, be{-2, 6};
    CHECK(t4.translate(f, al).norm() == doctest::Approx(f.norm()).epsilon(1e-13));
    const cplx factor = std::polar(1.0, 0.5 * t4.eps_b() * wedge(to_point(al), to_point(be)));
    CHECK((t4.translate(t4.translate(f, be), al) - factor * t4.translate(f, al + be)).norm() <
          1e-11 * f.norm());
    // A full period of the torus is the identity up to chi.
    CHECK((t.translate(f, {8, 0}) - f).norm() < 1e-11 * f.norm());
  }
}
