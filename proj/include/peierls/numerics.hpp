#pragma once

#include <span>
#include <vector>

namespace peierls {

struct QuadratureRule {
  std::vector<double> nodes;    // on [0, 1]
  std::vector<double> weights;  // sum to 1
};

// n-point Gauss-Legendre rule mapped to [0, 1]; cached per n.
const QuadratureRule& gauss_legendre(int n);

// Composite rule: `panels` equal panels of an n-point rule on [0, 1].
QuadratureRule composite_gauss_legendre(int n, int panels);

// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace peierls
