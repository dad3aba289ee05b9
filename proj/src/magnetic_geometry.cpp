#include "peierls/magnetic_geometry.hpp"

#include <algorithm>
#include <cmath>

#include "peierls/numerics.hpp"

namespace peierls {

namespace {

int panels_for(double oscillations) {
  return 1 + static_cast<int>(std::floor(2.0 * std::abs(oscillations)));
}

double max_phase_span(const std::vector<DualVector>& ks, Point2 d) {
  double m = 0.0;
  for (const auto& k : ks) m = std::max(m, std::abs(k.k1 * d.x1 + k.k2 * d.x2));
  return m;
}

std::vector<DualVector> wave_numbers(const std::vector<FourierMode>& modes) {
  std::vector<DualVector> ks;
  for (const auto& m : modes) ks.push_back(m.k);
  return ks;
}

// int_0^1 ds int_0^1 s du f(p0 + s e1 + u s e2), tensor Gauss-Legendre.
template <class F>
double simplex_moment(F&& f, Point2 p0, Point2 e1, Point2 e2, const std::vector<DualVector>& ks,
                      int order) {
  const QuadratureRule rs = composite_gauss_legendre(order, panels_for(max_phase_span(ks, e1) +
                                                                       max_phase_span(ks, e2)));
  const QuadratureRule ru = composite_gauss_legendre(order, panels_for(max_phase_span(ks, e2)));
  double acc = 0.0;
  for (std::size_t i = 0; i < rs.nodes.size(); ++i) {
    const double s = rs.nodes[i];
    double inner = 0.0;
    for (std::size_t j = 0; j < ru.nodes.size(); ++j) {
      const double u = ru.nodes[j];
      inner += ru.weights[j] * f(p0 + s * e1 + (u * s) * e2);
    }
    acc += rs.weights[i] * s * inner;
  }
  return acc;
}

}  // namespace

double evaluate_modes(const std::vector<FourierMode>& modes, Point2 x) {
  cplx acc{0.0, 0.0};
  for (const auto& m : modes) acc += m.value * std::polar(1.0, pairing(m.k, x));
  return acc.real();
}

void require_hermitian_modes(const std::vector<FourierMode>& modes, const char* what) {
  for (const auto& m : modes) {
    const auto partner = std::find_if(modes.begin(), modes.end(), [&](const FourierMode& o) {
      return std::abs(o.k.k1 + m.k.k1) < 1e-12 && std::abs(o.k.k2 + m.k.k2) < 1e-12;
    });
    if (partner == modes.end() || std::abs(partner->value - std::conj(m.value)) > 1e-12) {
      throw ConfigError(std::string(what) + ": modes are not Hermitian-symmetric (real field)");
    }
  }
}

Point2 PeriodicVectorPotential::value(Point2 x) const {
  cplx a1{0.0, 0.0};
  cplx a2{0.0, 0.0};
  for (const auto& m : modes_) {
    const cplx e = std::polar(1.0, pairing(m.k, x));
    a1 += m.a1 * e;
    a2 += m.a2 * e;
  }
  return {a1.real(), a2.real()};
}

double PeriodicVectorPotential::curl(Point2 x) const { return evaluate_modes(curl_modes(), x); }

std::vector<FourierMode> PeriodicVectorPotential::curl_modes() const {
  std::vector<FourierMode> out;
  for (const auto& m : modes_) {
    // d1 A2 - d2 A1 with d_j e^{i<k,x>} = 2 pi i k_j e^{i<k,x>}
    out.push_back({m.k, kTwoPi * kI * (m.k.k1 * m.a2 - m.k.k2 * m.a1)});
  }
  return out;
}

double PeriodicVectorPotential::line_integral(Point2 x, Point2 y, int order) const {
  if (modes_.empty()) return 0.0;
  const Point2 d = y - x;
  double span = 0.0;
  for (const auto& m : modes_) span = std::max(span, std::abs(m.k.k1 * d.x1 + m.k.k2 * d.x2));
  const QuadratureRule r = composite_gauss_legendre(order, panels_for(span));
  double acc = 0.0;
  for (std::size_t i = 0; i < r.nodes.size(); ++i) {
    const Point2 a = value(x + r.nodes[i] * d);
    acc += r.weights[i] * (a.x1 * d.x1 + a.x2 * d.x2);
  }
  return acc;
}

PeriodicVectorPotential PeriodicVectorPotential::scaled(double s) const {
  std::vector<VectorMode> out = modes_;
  for (auto& m : out) {
    m.a1 *= s;
    m.a2 *= s;
  }
  return PeriodicVectorPotential(std::move(out));
}

PeriodicVectorPotential periodic_potential_from_field(const std::vector<FourierMode>& field_modes) {
  std::vector<VectorMode> out;
  for (const auto& m : field_modes) {
    const double k2 = m.k.k1 * m.k.k1 + m.k.k2 * m.k.k2;
    if (k2 == 0.0) {
      if (std::abs(m.value) > 1e-14) {
        throw ConfigError("background field has nonzero mean flux per cell (zero-flux condition)");
      }
      continue;
    }
    const cplx phi = -m.value / (kTwoPi * kTwoPi * k2);
    out.push_back({m.k, -kTwoPi * kI * m.k.k2 * phi, kTwoPi * kI * m.k.k1 * phi});
  }
  return PeriodicVectorPotential(std::move(out));
}

void MagneticFieldSpec::validate() const {
  if (!(epsilon >= 0.0)) throw ConfigError("field: epsilon must be >= 0");
  if (!(fluctuation_c >= 0.0 && fluctuation_c <= 1.0)) {
    throw ConfigError("field: fluctuation_c must lie in [0, 1]");
  }
  require_hermitian_modes(fluctuation_modes, "field.modes");
}

double MagneticFieldSpec::unscaled_field(Point2 x) const {
  double b = constant_b;
  if (has_fluctuation()) b += fluctuation_c * evaluate_modes(fluctuation_modes, x);
  return b;
}

MagneticFieldSpec MagneticFieldSpec::with_epsilon(double eps) const {
  MagneticFieldSpec s = *this;
  s.epsilon = eps;
  return s;
}

MagneticFieldSpec MagneticFieldSpec::constant_part() const {
  MagneticFieldSpec s = *this;
  s.fluctuation_c = 0.0;
  s.fluctuation_modes.clear();
  return s;
}

GaugePotential GaugePotential::perturbing(const MagneticFieldSpec& spec) {
  PeriodicVectorPotential fl;
  if (spec.has_fluctuation()) {
    fl = periodic_potential_from_field(spec.fluctuation_modes)
             .scaled(spec.epsilon * spec.fluctuation_c);
  }
  return {spec.epsilon * spec.constant_b, std::move(fl)};
}

GaugePotential GaugePotential::background(const std::vector<FourierMode>& field_modes) {
  return {0.0, periodic_potential_from_field(field_modes)};
}

double GaugePotential::line_integral(Point2 x, Point2 y, int order) const {
  return 0.5 * b_ * wedge(x, y) + periodic_.line_integral(x, y, order);
}

cplx line_phase(const GaugePotential& a, Point2 x, Point2 y, int order) {
  return std::polar(1.0, -a.line_integral(x, y, order));
}

double triangle_flux(const MagneticFieldSpec& spec, Point2 x, Point2 y, Point2 z, int order) {
  const Point2 e1 = y - x;
  const Point2 e2 = z - y;
  double flux = 0.5 * spec.constant_b * wedge(e1, e2);
  if (spec.has_fluctuation()) {
    auto f = [&](Point2 p) { return evaluate_modes(spec.fluctuation_modes, p); };
    flux += spec.fluctuation_c * wedge(e1, e2) *
            simplex_moment(f, x, e1, e2, wave_numbers(spec.fluctuation_modes), order);
  }
  return spec.epsilon * flux;
}

cplx omega(const MagneticFieldSpec& spec, Point2 x, Point2 y, Point2 z, int order) {
  return std::polar(1.0, -triangle_flux(spec, x, y, z, order));
}

double flux_moment_phi(const MagneticFieldSpec& spec, Point2 alpha, Point2 x, Point2 y,
                       int order) {
  double v = 0.5 * spec.constant_b;
  if (spec.has_fluctuation()) {
    auto f = [&](Point2 p) { return evaluate_modes(spec.fluctuation_modes, p); };
    v += spec.fluctuation_c *
         simplex_moment(f, alpha, x - alpha, y - x, wave_numbers(spec.fluctuation_modes), order);
  }
  return v;
}

double flux_moment_phi2(const MagneticFieldSpec& spec, Point2 alpha, Point2 beta, Point2 y,
                        int order) {
  double v = 0.5 * spec.constant_b;
  if (spec.has_fluctuation()) {
    auto f = [&](Point2 p) { return evaluate_modes(spec.fluctuation_modes, p); };
    v += spec.fluctuation_c * simplex_moment(f, alpha, beta - alpha, y - beta,
                                             wave_numbers(spec.fluctuation_modes), order);
  }
  return v;
}

CVector zak_translate(const CVector& f, const Supercell& box, LatticeVector g,
                      const MagneticFieldSpec& spec) {
  if (f.size() != box.size()) throw ConfigError("zak_translate: sample count mismatch");
  if (g.sup_norm() >= box.m_cells()) throw ConfigError("zak_translate: shift exceeds the box");
  const GaugePotential a = GaugePotential::perturbing(spec);
  const Point2 gp = to_point(g);
  CVector out = CVector::Zero(f.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const auto [u1, u2] = box.coords(i);
    const int s1 = u1 - g.n1 * box.n_s();
    const int s2 = u2 - g.n2 * box.n_s();
    if (!box.contains(s1, s2)) continue;
    out(i) = line_phase(a, box.position(i), gp) * f(box.index(s1, s2));
  }
  return out;
}

cplx PhaseCache::get(int u1, int u2, int v1, int v2) {
  const auto key = std::make_tuple(u1, u2, v1, v2);
  {
    std::lock_guard lock(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  const double s = 1.0 / ns_;
  const cplx v = line_phase(a_, {u1 * s, u2 * s}, {v1 * s, v2 * s});
  std::lock_guard lock(mu_);
  cache_.emplace(key, v);
  return v;
}

std::size_t PhaseCache::size() const {
  std::lock_guard lock(mu_);
  return cache_.size();
}

MagneticTorus::MagneticTorus(Supercell box, MagneticFieldSpec spec)
    : box_(box), spec_(std::move(spec)), pert_(GaugePotential::perturbing(spec_)) {
  spec_.validate();
  const double m = box_.m_cells();
  const double n = spec_.epsilon * spec_.constant_b * m * m / kTwoPi;
  n_ = std::lround(n);
  if (std::abs(n - static_cast<double>(n_)) > 1e-8) {
    throw ConfigError("torus: eps*b*M^2/(2 pi) = " + std::to_string(n) +
                      " is not an integer (flux quantization)");
  }
  if (spec_.has_fluctuation()) {
    for (const auto& md : spec_.fluctuation_modes) {
      const double a = md.k.k1 * m;
      const double b = md.k.k2 * m;
      if (std::abs(a - std::round(a)) > 1e-9 || std::abs(b - std::round(b)) > 1e-9) {
        throw ConfigError("torus: fluctuation wave vectors must satisfy k*M integer");
      }
    }
  }
}

double MagneticTorus::chi(LatticeVector a) const {
  return ((n_ * a.n1 * a.n2) % 2 == 0) ? 1.0 : -1.0;
}

cplx MagneticTorus::fold(int& u1, int& u2) const {
  const Point2 y = box_.position(u1, u2);
  const LatticeVector a = box_.fold(u1, u2);
  if (a.n1 == 0 && a.n2 == 0) return {1.0, 0.0};
  const double m = box_.m_cells();
  const Point2 ma{m * a.n1, m * a.n2};
  return chi(a) * constant_phase(eps_b(), y, ma);
}

cplx MagneticTorus::lambda(Point2 x, Point2 y) const { return line_phase(pert_, x, y); }

CVector MagneticTorus::translate(const CVector& f, LatticeVector g) const {
  if (f.size() != box_.size()) throw ConfigError("translate: sample count mismatch");
  const Point2 gp = to_point(g);
  CVector out(f.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    auto [u1, u2] = box_.coords(i);
    int s1 = u1 - g.n1 * box_.n_s();
    int s2 = u2 - g.n2 * box_.n_s();
    const cplx w = fold(s1, s2);
    out(i) = constant_phase(eps_b(), box_.position(i), gp) * w * f(box_.index(s1, s2));
  }
  return out;
}

}  // namespace peierls
