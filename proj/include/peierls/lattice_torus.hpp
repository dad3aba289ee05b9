#pragma once

// Lattice Z^2, its dual, the 2*pi duality pairing, the dual torus and the
// uniform Brillouin grid.
//
// Fourier conventions (used everywhere in the library):
//   <xi, x>          = 2*pi * (xi_1 x_1 + xi_2 x_2)
//   character(th, g) = exp(-i <th, g>)
//   F_T(f)(g)        = (1/M^2) sum_th exp(+i <th, g>) f(th)
// The 2*pi sits inside the exponent and the torus measure has total mass 1.

#include <compare>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "peierls/common.hpp"

namespace peierls {

struct LatticeVector {
  int n1 = 0;
  int n2 = 0;

  friend constexpr LatticeVector operator+(LatticeVector a, LatticeVector b) {
    return {a.n1 + b.n1, a.n2 + b.n2};
  }
  friend constexpr LatticeVector operator-(LatticeVector a, LatticeVector b) {
    return {a.n1 - b.n1, a.n2 - b.n2};
  }
  friend constexpr LatticeVector operator-(LatticeVector a) { return {-a.n1, -a.n2}; }
  friend constexpr LatticeVector operator*(int s, LatticeVector a) {
    return {s * a.n1, s * a.n2};
  }
  friend constexpr auto operator<=>(const LatticeVector&, const LatticeVector&) = default;

  // max(|n1|, |n2|)
  [[nodiscard]] int sup_norm() const;
};

// Real point of the configuration space X = R^2.
struct Point2 {
  double x1 = 0.0;
  double x2 = 0.0;

  friend constexpr Point2 operator+(Point2 a, Point2 b) { return {a.x1 + b.x1, a.x2 + b.x2}; }
  friend constexpr Point2 operator-(Point2 a, Point2 b) { return {a.x1 - b.x1, a.x2 - b.x2}; }
  friend constexpr Point2 operator*(double s, Point2 a) { return {s * a.x1, s * a.x2}; }
};

inline Point2 to_point(LatticeVector g) {
  return {static_cast<double>(g.n1), static_cast<double>(g.n2)};
}

// Coordinates in the dual basis e*_j.
struct DualVector {
  double k1 = 0.0;
  double k2 = 0.0;

  friend constexpr auto operator<=>(const DualVector&, const DualVector&) = default;
};

// Canonical representative of the dual torus, each coordinate in [-1/2, 1/2).
struct TorusPoint {
  double t1 = 0.0;
  double t2 = 0.0;
};

// x ^ y = x1 y2 - x2 y1
inline double wedge(Point2 x, Point2 y) { return x.x1 * y.x2 - x.x2 * y.x1; }

double pairing(DualVector xi, Point2 x);
double pairing(TorusPoint theta, LatticeVector gamma);
double pairing(TorusPoint theta, Point2 x);

struct WrapSplit {
  DualVector integer_part;  // integer coordinates
  TorusPoint fractional;    // in [-1/2, 1/2)^2
};

WrapSplit wrap_and_split(DualVector xi);

cplx character(TorusPoint theta, LatticeVector gamma);

// Uniform M x M grid on the dual torus with nodes (j - M/2)/M per axis.
class BrillouinGrid {
 public:
  explicit BrillouinGrid(int m_pts);

  [[nodiscard]] int m_pts() const { return m_; }
  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(m_) * m_; }
  [[nodiscard]] double weight() const { return 1.0 / static_cast<double>(size()); }
  [[nodiscard]] TorusPoint node(std::size_t index) const;
  [[nodiscard]] std::size_t index(int j1, int j2) const;
  // Index of the node theta = (0, 0).
  [[nodiscard]] std::size_t origin_index() const { return index(m_ / 2, m_ / 2); }
  [[nodiscard]] std::vector<TorusPoint> nodes() const;

 private:
  int m_;
};

// (1/M^2) sum_theta e^{i <theta, gamma>} f(theta); samples ordered like grid.node().
cplx torus_fourier(std::span<const cplx> samples, const BrillouinGrid& grid, LatticeVector gamma);

// Matrix-valued variant: entrywise transform of per-node matrices.
CMatrix torus_fourier(std::span<const CMatrix> samples, const BrillouinGrid& grid,
                      LatticeVector gamma);

// Real-space sample grid: M x M unit cells [-M/2, M/2)^2, n_s points per cell
// edge at x = g + j/n_s. Sites carry integer grid coordinates u = g*n_s + j.
class Supercell {
 public:
  Supercell(int m_cells, int n_s);

  [[nodiscard]] int m_cells() const { return m_; }
  [[nodiscard]] int n_s() const { return ns_; }
  [[nodiscard]] int side() const { return m_ * ns_; }
  [[nodiscard]] Eigen::Index size() const { return Eigen::Index(side()) * side(); }
  [[nodiscard]] int local_size() const { return ns_ * ns_; }

  // Grid coordinates of the lower-left site of the box.
  [[nodiscard]] int origin() const { return -(m_ / 2) * ns_; }
  [[nodiscard]] bool contains(int u1, int u2) const;
  [[nodiscard]] Eigen::Index index(int u1, int u2) const;  // requires contains()
  [[nodiscard]] std::pair<int, int> coords(Eigen::Index idx) const;
  [[nodiscard]] Point2 position(Eigen::Index idx) const;
  [[nodiscard]] Point2 position(int u1, int u2) const;
  [[nodiscard]] LatticeVector cell(Eigen::Index idx) const;
  [[nodiscard]] int local_index(Eigen::Index idx) const;
  [[nodiscard]] Eigen::Index index(LatticeVector cell, int local) const;

  // Fold grid coordinates into the box: u = u' + M*n_s*a; returns a.
  LatticeVector fold(int& u1, int& u2) const;

  // All cells of the box, n1-major.
  [[nodiscard]] std::vector<LatticeVector> cells() const;
  [[nodiscard]] std::size_t cell_ordinal(LatticeVector g) const;

 private:
  int m_;
  int ns_;
};

inline int floor_div(int a, int b) {
  const int q = a / b;
  return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

}  // namespace peierls
