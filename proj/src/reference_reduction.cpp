#include "peierls/reference_reduction.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <boost/math/special_functions/binomial.hpp>
#include <boost/math/special_functions/factorials.hpp>

namespace peierls {

ReferenceOperator build_reference(const PeriodicModel& model, const MagneticFieldSpec& spec,
                                  int m_cells, Boundary boundary) {
  model.validate();
  spec.validate();
  if (model.backend.kind != Backend::Kind::grid) {
    throw ConfigError("build_reference: requires the grid backend");
  }
  ReferenceOperator r;
  r.box = Supercell(m_cells, model.backend.n_s);
  r.spec = spec;
  r.boundary = boundary;
  r.energy_shift = model.energy_shift;
  std::optional<MagneticTorus> torus;
  if (boundary == Boundary::torus) {
    torus.emplace(r.box, spec);
    r.flux_quantum = torus->flux_quantum();
  }
  const GaugePotential pert = GaugePotential::perturbing(spec);
  const int ns = r.box.n_s();
  const double t = static_cast<double>(ns) * ns;
  // A° is cell periodic: cache its link phases on cell-reduced endpoints.
  PhaseCache background(GaugePotential::background(model.background_field_modes), ns);
  const bool has_background = !model.background_field_modes.empty();

  std::vector<Eigen::Triplet<cplx>> trip;
  trip.reserve(static_cast<std::size_t>(r.box.size()) * 5);
  const int steps[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  for (Eigen::Index i = 0; i < r.box.size(); ++i) {
    const auto [u1, u2] = r.box.coords(i);
    const Point2 x = r.box.position(u1, u2);
    trip.emplace_back(i, i, 4.0 * t + model.potential(x) + model.energy_shift);
    for (const auto& s : steps) {
      int v1 = u1 + s[0];
      int v2 = u2 + s[1];
      const Point2 y = r.box.position(v1, v2);
      cplx link = -t * line_phase(pert, x, y);
      if (has_background) {
        const int c1 = floor_div(u1, ns) * ns;
        const int c2 = floor_div(u2, ns) * ns;
        link *= background.get(u1 - c1, u2 - c2, v1 - c1, v2 - c2);
      }
      if (!r.box.contains(v1, v2)) {
        if (!torus) continue;
        link *= torus->fold(v1, v2);
      }
      trip.emplace_back(i, r.box.index(v1, v2), link);
    }
  }
  r.h.resize(r.box.size(), r.box.size());
  r.h.setFromTriplets(trip.begin(), trip.end());
  return r;
}

ProjectionBasis projection_basis(const CMatrix& pi) {
  const EigenSystem es = hermitian_eigen(0.5 * (pi + pi.adjoint()));
  Eigen::Index split = 0;
  while (split < es.values.size() && es.values(split) <= 0.5) ++split;
  return {es.vectors.rightCols(es.values.size() - split), es.vectors.leftCols(split)};
}

SchurBlocks schur_resolvent(const CMatrix& h, const CMatrix& pi, cplx lambda, double tolerance) {
  const ProjectionBasis pb = projection_basis(pi);
  const CMatrix& u = pb.range;
  const CMatrix& q = pb.complement;
  const Eigen::Index r = u.cols();
  const EigenSystem hq = hermitian_eigen(q.adjoint() * h * q);
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  double nearest = 0.0;
  double dist = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < hq.values.size(); ++i) {
    const double d = std::abs(hq.values(i) - lambda);
    if (d < dist) {
      dist = d;
      nearest = hq.values(i);
    }
  }
  if (dist < tolerance * scale) {
    throw NumericalError("schur_resolvent: Pi_perp (H - lambda) Pi_perp not invertible at lambda = (" +
                         std::to_string(lambda.real()) + ", " + std::to_string(lambda.imag()) +
                         "), nearest compressed eigenvalue " + std::to_string(nearest));
  }
  CVector inv_diag(hq.values.size());
  for (Eigen::Index i = 0; i < inv_diag.size(); ++i) inv_diag(i) = 1.0 / (hq.values(i) - lambda);
  const CMatrix rq = hq.vectors * inv_diag.asDiagonal() * hq.vectors.adjoint();
  const CMatrix b = u.adjoint() * h * q;
  const CMatrix c = b.adjoint();
  const CMatrix s = u.adjoint() * h * u - lambda * CMatrix::Identity(r, r) - b * rq * c;
  Eigen::FullPivLU<CMatrix> lu(s);
  if (!lu.isInvertible()) {
    throw NumericalError("schur_resolvent: Schur complement singular at lambda = (" +
                         std::to_string(lambda.real()) + ", " + std::to_string(lambda.imag()) + ")");
  }
  const CMatrix rt = lu.inverse();
  SchurBlocks out;
  out.r_perp = q * rq * q.adjoint();
  out.r_tilde = u * rt * u.adjoint();
  const CMatrix upper_right = -rt * b * rq;
  const CMatrix lower_left = -rq * c * rt;
  const CMatrix lower_right = rq + rq * c * rt * b * rq;
  out.inverse = u * rt * u.adjoint() + u * upper_right * q.adjoint() + q * lower_left * u.adjoint() +
                q * lower_right * q.adjoint();
  return out;
}

std::vector<double> schur_singular_points(const CMatrix& h, const CMatrix& pi, double lo,
                                          double hi, double tolerance) {
  const ProjectionBasis pb = projection_basis(pi);
  const CMatrix& u = pb.range;
  const CMatrix& q = pb.complement;
  const EigenSystem hq = hermitian_eigen(q.adjoint() * h * q);
  const CMatrix huu = u.adjoint() * h * u;
  const CMatrix b = u.adjoint() * h * q * hq.vectors;  // coupling in the H_perp eigenbasis
  auto negative_count = [&](double t) {
    CMatrix s = huu - t * CMatrix::Identity(huu.rows(), huu.cols());
    for (Eigen::Index j = 0; j < hq.values.size(); ++j) {
      s -= b.col(j) * b.col(j).adjoint() / (hq.values(j) - t);
    }
    const RVector ev = hermitian_eigenvalues(s);
    return static_cast<int>((ev.array() < 0.0).count());
  };
  std::vector<double> edges{lo};
  for (Eigen::Index j = 0; j < hq.values.size(); ++j) {
    if (hq.values(j) > lo && hq.values(j) < hi) edges.push_back(hq.values(j));
  }
  edges.push_back(hi);
  std::vector<double> roots;
  const double eta = 1e-9 * std::max(1.0, hi - lo);
  for (std::size_t e = 0; e + 1 < edges.size(); ++e) {
    const double a = edges[e] + (e == 0 ? 0.0 : eta);
    const double z = edges[e + 1] - (e + 2 == edges.size() ? 0.0 : eta);
    if (!(z > a)) continue;
    const int ca = negative_count(a);
    const int cz = negative_count(z);
    // S(t) decreases in t, so the negative count is nondecreasing on the branch.
    for (int k = ca; k < cz; ++k) {
      double l = a;
      double r = z;
      while (r - l > tolerance) {
        const double mid = 0.5 * (l + r);
        if (negative_count(mid) > k) {
          r = mid;
        } else {
          l = mid;
        }
      }
      roots.push_back(0.5 * (l + r));
    }
  }
  return roots;
}

namespace {

InvertibilityReport invertibility_from_spectrum(const RVector& mu, const std::vector<double>& grid,
                                                double blowup) {
  InvertibilityReport rep;
  for (double t : grid) {
    double d = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < mu.size(); ++i) d = std::min(d, std::abs(mu(i) - t));
    const double n = d > 0.0 ? 1.0 / d : std::numeric_limits<double>::infinity();
    if (n > blowup) {
      rep.failures.push_back(t);
    } else {
      rep.sup_norm = std::max(rep.sup_norm, n);
    }
  }
  if (!rep.failures.empty()) rep.sup_norm = std::numeric_limits<double>::infinity();
  return rep;
}

}  // namespace

InvertibilityReport window_invertibility(const CMatrix& h, const CMatrix& pi,
                                         const std::vector<double>& t_grid, double blowup) {
  const ProjectionBasis pb = projection_basis(pi);
  const CMatrix& q = pb.complement;
  return invertibility_from_spectrum(hermitian_eigenvalues(q.adjoint() * h * q), t_grid, blowup);
}

InvertibilityReport window_invertibility(const CMatrix& h, const TightFrameCorrection& c,
                                         const std::vector<double>& t_grid, double blowup) {
  return window_invertibility(h, CMatrix(c.vectors * c.vectors.adjoint()), t_grid, blowup);
}

SpectralDistance spectral_distance(const std::vector<double>& s1, const std::vector<double>& s2,
                                   double lo, double hi) {
  std::vector<double> a = s1;
  std::vector<double> b = s2;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  auto nearest = [](const std::vector<double>& s, double x) {
    if (s.empty()) return std::numeric_limits<double>::infinity();
    auto it = std::lower_bound(s.begin(), s.end(), x);
    double d = std::numeric_limits<double>::infinity();
    if (it != s.end()) d = std::min(d, std::abs(*it - x));
    if (it != s.begin()) d = std::min(d, std::abs(*std::prev(it) - x));
    return d;
  };
  SpectralDistance out;
  bool seen = false;
  for (double x : a) {
    if (x < lo || x > hi) continue;
    seen = true;
    out.value = std::max(out.value, nearest(b, x));
  }
  for (double y : b) {
    if (y < lo || y > hi) continue;
    seen = true;
    out.value = std::max(out.value, nearest(a, y));
  }
  out.empty = !seen;
  return out;
}

CVector propagate(const EigenSystem& h, const CVector& v, double t) {
  CVector c = h.vectors.adjoint() * v;
  for (Eigen::Index i = 0; i < c.size(); ++i) c(i) *= std::polar(1.0, -t * h.values(i));
  return h.vectors * c;
}

std::pair<double, double> spectral_enclosure(const SparseC& h) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (Eigen::Index r = 0; r < h.outerSize(); ++r) {
    double centre = 0.0;
    double radius = 0.0;
    for (SparseC::InnerIterator it(h, r); it; ++it) {
      if (it.col() == r) {
        centre = it.value().real();
      } else {
        radius += std::abs(it.value());
      }
    }
    lo = std::min(lo, centre - radius);
    hi = std::max(hi, centre + radius);
  }
  return {lo, hi};
}

CVector propagate(const SparseC& h, const CVector& v, double t, double tol) {
  const auto [lo, hi] = spectral_enclosure(h);
  auto op = [&h](const CVector& in, CVector& out) { out = h * in; };
  return chebyshev_propagate(op, v, t, lo - 1e-6, hi + 1e-6, tol);
}

EvolutionRecord evolution_error_curve(const EigenSystem& h, const CMatrix& m_eff,
                                      const TightFrameCorrection& c, double lo, double hi,
                                      const std::vector<double>& times, double epsilon,
                                      std::uint64_t seed) {
  std::vector<Eigen::Index> sel;
  for (Eigen::Index i = 0; i < h.values.size(); ++i) {
    if (h.values(i) > lo && h.values(i) < hi) sel.push_back(i);
  }
  if (sel.empty()) throw NumericalError("evolution_error_curve: window contains no eigenvalue");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  CVector v = CVector::Zero(h.vectors.rows());
  for (Eigen::Index i : sel) v += cplx{gauss(rng), gauss(rng)} * h.vectors.col(i);
  v.normalize();

  const EigenSystem me = hermitian_eigen(m_eff);
  const CVector coords = c.vectors.adjoint() * v;
  const CVector outside = v - c.vectors * coords;
  const CVector modal = me.vectors.adjoint() * coords;
  EvolutionRecord rec;
  rec.times = times;
  rec.epsilon = epsilon;
  for (double t : times) {
    const CVector exact = propagate(h, v, t);
    CVector m = modal;
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) *= std::polar(1.0, -t * me.values(i));
    const CVector eff = c.vectors * (me.vectors * m) + outside;
    rec.errors.push_back((exact - eff).norm());
  }
  return rec;
}

namespace {

double bump_g(double tau) { return tau > 0.0 ? std::exp(-1.0 / tau) : 0.0; }
double bump_g_prime(double tau) { return tau > 0.0 ? std::exp(-1.0 / tau) / (tau * tau) : 0.0; }

double finite_difference(const std::function<double(double)>& f, int k, double x, double h) {
  const double fm2 = f(x - 2 * h), fm1 = f(x - h), f0 = f(x), fp1 = f(x + h), fp2 = f(x + 2 * h);
  switch (k) {
    case 0:
      return f0;
    case 1:
      return (fm2 - 8 * fm1 + 8 * fp1 - fp2) / (12 * h);
    case 2:
      return (-fm2 + 16 * fm1 - 30 * f0 + 16 * fp1 - fp2) / (12 * h * h);
    case 3:
      return (-fm2 + 2 * fm1 - 2 * fp1 + fp2) / (2 * h * h * h);
    case 4:
      return (fm2 - 4 * fm1 + 6 * f0 - 4 * fp1 + fp2) / (h * h * h * h);
    default:
      throw ConfigError("5-point differences provide derivatives up to order 4");
  }
}

}  // namespace

double hs_cutoff(double y) {
  const double u = std::abs(y);
  if (u <= 1.0) return 1.0;
  if (u >= 2.0) return 0.0;
  const double a = bump_g(2.0 - u);
  const double b = bump_g(u - 1.0);
  return a / (a + b);
}

double hs_cutoff_derivative(double y) {
  const double u = std::abs(y);
  if (u <= 1.0 || u >= 2.0) return 0.0;
  const double a = bump_g(2.0 - u);
  const double b = bump_g(u - 1.0);
  const double da = -bump_g_prime(2.0 - u);
  const double db = bump_g_prime(u - 1.0);
  const double d = (da * b - a * db) / ((a + b) * (a + b));
  return y < 0 ? -d : d;
}

cplx phi_t_derivative(const std::function<double(double)>& phi,
                      const std::function<double(int, double)>& derivative, double t, int k,
                      double x, double step) {
  cplx acc{0.0, 0.0};
  const cplx e = std::polar(1.0, -t * x);
  for (int j = 0; j <= k; ++j) {
    const double dj = derivative ? derivative(j, x) : finite_difference(phi, j, x, step);
    acc += boost::math::binomial_coefficient<double>(k, j) * std::pow(cplx{0.0, -t}, k - j) * dj;
  }
  return e * acc;
}

QuasiAnalyticValue quasi_analytic_extension(const std::function<double(double)>& phi, double t,
                                            int n, cplx z,
                                            const std::function<double(int, double)>& derivative,
                                            double step) {
  if (n < 0 || n > 6) throw ConfigError("quasi_analytic_extension: need 0 <= N <= 6");
  if (!derivative && n > 3) {
    throw ConfigError("quasi_analytic_extension: N > 3 needs an analytic derivative evaluator");
  }
  const double x = z.real();
  const double y = z.imag();
  const double chi = hs_cutoff(y);
  const double dchi = hs_cutoff_derivative(y);
  QuasiAnalyticValue out{{0.0, 0.0}, {0.0, 0.0}};
  cplx series{0.0, 0.0};
  for (int k = 0; k <= n; ++k) {
    const cplx term = phi_t_derivative(phi, derivative, t, k, x, step) * std::pow(cplx{0.0, y}, k) /
                      boost::math::factorial<double>(k);
    series += term;
  }
  out.value = series * chi;
  const cplx top = phi_t_derivative(phi, derivative, t, n + 1, x, step) *
                   std::pow(cplx{0.0, y}, n) / boost::math::factorial<double>(n);
  out.dbar = 0.5 * (kI * series * dchi + top * chi);
  return out;
}

}  // namespace peierls
