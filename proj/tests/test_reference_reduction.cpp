#include <doctest.h>

#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <vector>

#include "peierls/reference_reduction.hpp"
#include "support.hpp"

using namespace peierls;

namespace {

// i dv/dt = H v integrated by adaptive Dormand-Prince.
CVector ode_propagate(const CMatrix& h, const CVector& v0, double t) {
  namespace ode = boost::numeric::odeint;
  using State = std::vector<cplx>;
  State s(v0.data(), v0.data() + v0.size());
  const auto rhs = [&](const State& x, State& dx, double) {
    const Eigen::Map<const CVector> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    const CVector r = -kI * (h * xv);
    dx.assign(r.data(), r.data() + r.size());
  };
  ode::integrate_adaptive(ode::make_controlled(1e-13, 1e-13, ode::runge_kutta_dopri5<State>()),
                          rhs, s, 0.0, t, 1e-3);
  return Eigen::Map<CVector>(s.data(), static_cast<Eigen::Index>(s.size()));
}

}  // namespace

TEST_SUITE("reference_reduction") {
  TEST_CASE("free magnetic Laplacian is nonnegative") {
    PeriodicModel free;
    free.backend = Backend::grid(3);
    const ReferenceOperator r = build_reference(free, testsupport::constant_field(0.05, 8, 100), 8);
    CHECK(r.flux_quantum == 5);
    const CMatrix d(r.h);
    CHECK(hermiticity_defect(d) < 1e-14);
    CHECK(hermitian_eigenvalues(d)(0) >= -1e-12);
    const ReferenceOperator open =
        build_reference(free, testsupport::constant_field(0.05, 8, 100), 8, Boundary::open);
    CHECK(hermitian_eigenvalues(CMatrix(open.h))(0) > 0.0);
  }

  TEST_CASE("magnetic translations commute with the torus operator") {
    const auto& ref = testsupport::small_reference();
    // n = 4 flux quanta on M = 8: even shifts respect the wrap rule
    const ReferenceOperator r = build_reference(ref.model, testsupport::constant_field(0.04, 8, 100), 8);
    const MagneticTorus torus(r.box, r.spec);
    std::mt19937_64 rng(41);
    const CVector f = testsupport::random_vector(r.box.size(), rng);
    for (LatticeVector g : {LatticeVector{2, 0}, LatticeVector{0, 2}, LatticeVector{2, -4}}) {
      const CVector lhs = r.h * torus.translate(f, g);
      const CVector rhs = torus.translate(r.h * f, g);
      REQUIRE((lhs - rhs).norm() < 1e-10 * rhs.norm());
    }
    CHECK_THROWS_AS(build_reference(ref.model, testsupport::constant_field(0.013, 8, 100), 8),
                    ConfigError);
  }

  TEST_CASE("Schur resolvent reproduces the inverse") {
    std::mt19937_64 rng(42);
    const CMatrix h = testsupport::random_hermitian(6, rng);
    const CMatrix pi = testsupport::random_projection(6, 2, rng);
    const cplx lambda{0.3, 0.2};
    const SchurBlocks s = schur_resolvent(h, pi, lambda);
    const CMatrix direct = (h - lambda * CMatrix::Identity(6, 6)).inverse();
    CHECK((s.inverse - direct).norm() < 1e-10 * direct.norm());
    const CMatrix perp = CMatrix::Identity(6, 6) - pi;
    CHECK((s.r_perp - perp * s.r_perp * perp).norm() < 1e-10);
    CHECK((s.r_tilde - pi * s.r_tilde * pi).norm() < 1e-10);

    SUBCASE("lambda on the compressed spectrum") {
      RVector d(4);
      d << -1.0, 0.5, 2.0, 3.0;
      const CMatrix hd = d.cast<cplx>().asDiagonal();
      CMatrix p = CMatrix::Zero(4, 4);
      p(0, 0) = 1.0;
      CHECK_THROWS_AS(schur_resolvent(hd, p, cplx{0.5, 0.0}), NumericalError);
    }
  }

  TEST_CASE("singular points of the Schur complement are eigenvalues") {
    std::mt19937_64 rng(43);
    const CMatrix h = testsupport::random_hermitian(8, rng);
    const CMatrix pi = testsupport::random_projection(8, 3, rng);
    const RVector ev = hermitian_eigenvalues(h);
    const double lo = ev(1) - 0.01, hi = ev(6) + 0.01;
    const auto pts = schur_singular_points(h, pi, lo, hi);
    REQUIRE(pts.size() == 6);
    for (std::size_t i = 0; i < pts.size(); ++i) CHECK(std::abs(pts[i] - ev(i + 1)) < 1e-8);
  }

  TEST_CASE("window invertibility") {
    RVector d(4);
    d << -1.0, 0.0, 1.0, 3.0;
    const CMatrix h = d.cast<cplx>().asDiagonal();
    CMatrix p = CMatrix::Zero(4, 4);
    p(1, 1) = 1.0;
    const auto ok = window_invertibility(h, p, {-0.5, 0.0, 0.5});
    CHECK(ok.failures.empty());
    CHECK(ok.sup_norm == doctest::Approx(2.0));
    const auto bad = window_invertibility(h, p, {0.0, 1.0});
    REQUIRE(bad.failures.size() == 1);
    CHECK(bad.failures[0] == 1.0);
    CHECK(std::isinf(bad.sup_norm));
  }

  TEST_CASE("spectral distance") {
    auto d = spectral_distance({1.0, 2.0}, {1.1, 2.0}, 0.0, 3.0);
    CHECK(d.value == doctest::Approx(0.1));
    CHECK_FALSE(d.empty);
    d = spectral_distance({1.0, 2.0}, {1.0, 2.0, 5.0}, 0.0, 3.0);
    CHECK(d.value == 0.0);
    d = spectral_distance({1.0}, {2.0}, 3.0, 4.0);
    CHECK(d.empty);
  }

  TEST_CASE("propagation") {
    std::mt19937_64 rng(44);
    const CMatrix h = testsupport::random_hermitian(8, rng);
    const EigenSystem es = hermitian_eigen(h);
    CVector v = testsupport::random_vector(8, rng);
    v.normalize();
    CHECK((propagate(es, v, 0.0) - v).norm() < 1e-15);
    const SparseC hs = to_sparse(h);
    for (double t : {0.5, 2.0, 7.0}) {
      const CVector a = propagate(es, v, t);
      CHECK(a.norm() == doctest::Approx(1.0).epsilon(1e-13));
      CHECK((a - ode_propagate(h, v, t)).norm() < 1e-9);
      CHECK((propagate(hs, v, t) - a).norm() < 1e-11);
    }
    const auto [lo, hi] = spectral_enclosure(hs);
    CHECK(lo <= es.values(0));
    CHECK(hi >= es.values(7));
  }

  TEST_CASE("cutoff and quasi-analytic extension") {
    CHECK(hs_cutoff(0.0) == 1.0);
    CHECK(hs_cutoff(1.0) == 1.0);
    CHECK(hs_cutoff(-2.0) == 0.0);
    CHECK(hs_cutoff(2.5) == 0.0);
    const double y = 1.37;
    const double fd = (hs_cutoff(y + 1e-6) - hs_cutoff(y - 1e-6)) / 2e-6;
    CHECK(hs_cutoff_derivative(y) == doctest::Approx(fd).epsilon(1e-6));

    const auto phi = [](double s) { return std::exp(-s * s); };
    const double t = 0.7;
    const auto on_axis = quasi_analytic_extension(phi, t, 2, {0.3, 0.0});
    CHECK(std::abs(on_axis.value - std::polar(phi(0.3), -t * 0.3)) < 1e-12);
    const auto outside = quasi_analytic_extension(phi, t, 2, {0.3, 2.5});
    CHECK(std::abs(outside.value) == 0.0);
    CHECK(std::abs(outside.dbar) == 0.0);
    // inside the plateau the dbar-defect scales like |y|^N
    const double a = std::abs(quasi_analytic_extension(phi, t, 2, {0.3, 0.1}).dbar);
    const double b = std::abs(quasi_analytic_extension(phi, t, 2, {0.3, 0.05}).dbar);
    CHECK(a / b == doctest::Approx(4.0).epsilon(0.05));
    CHECK_THROWS_AS(quasi_analytic_extension(phi, t, 4, {0.3, 0.1}), ConfigError);
  }
}
