#include "peierls/lattice_torus.hpp"

#include <cmath>
#include <cstdlib>

namespace peierls {

int LatticeVector::sup_norm() const { return std::max(std::abs(n1), std::abs(n2)); }

double pairing(DualVector xi, Point2 x) { return kTwoPi * (xi.k1 * x.x1 + xi.k2 * x.x2); }

double pairing(TorusPoint theta, LatticeVector gamma) {
  return kTwoPi * (theta.t1 * gamma.n1 + theta.t2 * gamma.n2);
}

double pairing(TorusPoint theta, Point2 x) { return kTwoPi * (theta.t1 * x.x1 + theta.t2 * x.x2); }

WrapSplit wrap_and_split(DualVector xi) {
  const double i1 = std::floor(xi.k1 + 0.5);
  const double i2 = std::floor(xi.k2 + 0.5);
  return {{i1, i2}, {xi.k1 - i1, xi.k2 - i2}};
}

cplx character(TorusPoint theta, LatticeVector gamma) {
  return std::polar(1.0, -pairing(theta, gamma));
}

BrillouinGrid::BrillouinGrid(int m_pts) : m_(m_pts) {
  if (m_pts <= 0) throw ConfigError("BrillouinGrid: number of points must be positive");
}

TorusPoint BrillouinGrid::node(std::size_t index) const {
  const int j1 = static_cast<int>(index / m_);
  const int j2 = static_cast<int>(index % m_);
  const double m = m_;
  return {(j1 - m_ / 2) / m, (j2 - m_ / 2) / m};
}

std::size_t BrillouinGrid::index(int j1, int j2) const {
  return static_cast<std::size_t>(j1) * m_ + static_cast<std::size_t>(j2);
}

std::vector<TorusPoint> BrillouinGrid::nodes() const {
  std::vector<TorusPoint> out(size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = node(i);
  return out;
}

cplx torus_fourier(std::span<const cplx> samples, const BrillouinGrid& grid, LatticeVector gamma) {
  if (samples.size() != grid.size()) throw ConfigError("torus_fourier: sample count mismatch");
  cplx acc{0.0, 0.0};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    acc += std::polar(1.0, pairing(grid.node(i), gamma)) * samples[i];
  }
  return acc * grid.weight();
}

CMatrix torus_fourier(std::span<const CMatrix> samples, const BrillouinGrid& grid,
                      LatticeVector gamma) {
  if (samples.size() != grid.size() || samples.empty()) {
    throw ConfigError("torus_fourier: sample count mismatch");
  }
  CMatrix acc = CMatrix::Zero(samples[0].rows(), samples[0].cols());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    acc += std::polar(1.0, pairing(grid.node(i), gamma)) * samples[i];
  }
  return acc * grid.weight();
}

Supercell::Supercell(int m_cells, int n_s) : m_(m_cells), ns_(n_s) {
  if (m_cells < 2 || m_cells % 2 != 0) throw ConfigError("Supercell: M must be even and >= 2");
  if (n_s < 1) throw ConfigError("Supercell: n_s must be positive");
}

bool Supercell::contains(int u1, int u2) const {
  const int lo = origin();
  const int hi = lo + side();
  return u1 >= lo && u1 < hi && u2 >= lo && u2 < hi;
}

Eigen::Index Supercell::index(int u1, int u2) const {
  return Eigen::Index(u1 - origin()) * side() + (u2 - origin());
}

std::pair<int, int> Supercell::coords(Eigen::Index idx) const {
  return {static_cast<int>(idx / side()) + origin(), static_cast<int>(idx % side()) + origin()};
}

Point2 Supercell::position(int u1, int u2) const {
  return {static_cast<double>(u1) / ns_, static_cast<double>(u2) / ns_};
}

Point2 Supercell::position(Eigen::Index idx) const {
  const auto [u1, u2] = coords(idx);
  return position(u1, u2);
}

LatticeVector Supercell::cell(Eigen::Index idx) const {
  const auto [u1, u2] = coords(idx);
  return {floor_div(u1, ns_), floor_div(u2, ns_)};
}

int Supercell::local_index(Eigen::Index idx) const {
  const auto [u1, u2] = coords(idx);
  return (u1 - floor_div(u1, ns_) * ns_) * ns_ + (u2 - floor_div(u2, ns_) * ns_);
}

Eigen::Index Supercell::index(LatticeVector g, int local) const {
  return index(g.n1 * ns_ + local / ns_, g.n2 * ns_ + local % ns_);
}

LatticeVector Supercell::fold(int& u1, int& u2) const {
  const int s = side();
  const int a1 = floor_div(u1 - origin(), s);
  const int a2 = floor_div(u2 - origin(), s);
  u1 -= a1 * s;
  u2 -= a2 * s;
  return {a1, a2};
}

std::vector<LatticeVector> Supercell::cells() const {
  std::vector<LatticeVector> out;
  out.reserve(static_cast<std::size_t>(m_) * m_);
  for (int g1 = -m_ / 2; g1 < m_ / 2; ++g1) {
    for (int g2 = -m_ / 2; g2 < m_ / 2; ++g2) out.push_back({g1, g2});
  }
  return out;
}

std::size_t Supercell::cell_ordinal(LatticeVector g) const {
  return static_cast<std::size_t>(g.n1 + m_ / 2) * m_ + static_cast<std::size_t>(g.n2 + m_ / 2);
}

}  // namespace peierls
