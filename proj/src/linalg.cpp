#include "peierls/linalg.hpp"

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include <boost/math/special_functions/bessel.hpp>
#include <cmath>
#include <random>
#include <string>

namespace peierls {

namespace {

EigenSystem run_zheevd(const CMatrix& a, bool vectors) {
  if (a.rows() != a.cols()) throw NumericalError("hermitian_eigen: matrix not square");
  const lapack_int n = static_cast<lapack_int>(a.rows());
  EigenSystem out;
  out.values.resize(n);
  if (n == 0) return out;
  CMatrix work = a;  // column-major copy, overwritten by eigenvectors
  const lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', 'L', n,
                                         work.data(), n, out.values.data());
  if (info != 0) {
    throw NumericalError("zheevd failed with info=" + std::to_string(info));
  }
  if (vectors) out.vectors = std::move(work);
  return out;
}

}  // namespace

EigenSystem hermitian_eigen(const CMatrix& a) { return run_zheevd(a, true); }

RVector hermitian_eigenvalues(const CMatrix& a) { return run_zheevd(a, false).values; }

double spectral_norm(const CMatrix& a) {
  if (a.size() == 0) return 0.0;
  // Gram on the smaller side.
  const CMatrix g = a.rows() <= a.cols() ? CMatrix(a * a.adjoint()) : CMatrix(a.adjoint() * a);
  const RVector ev = hermitian_eigenvalues(g);
  return std::sqrt(std::max(0.0, ev.maxCoeff()));
}

double hermiticity_defect(const CMatrix& a) {
  if (a.size() == 0) return 0.0;
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

CMatrix apply_function(const EigenSystem& es, const std::function<cplx(double)>& f) {
  CVector d(es.values.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = f(es.values(i));
  return es.vectors * d.asDiagonal() * es.vectors.adjoint();
}

LanczosResult lanczos(const LinearOp& op, Eigen::Index dim, int steps, std::uint64_t seed) {
  steps = static_cast<int>(std::min<Eigen::Index>(steps, dim));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  CVector q(dim);
  for (Eigen::Index i = 0; i < dim; ++i) q(i) = {gauss(rng), gauss(rng)};
  q.normalize();

  CMatrix basis(dim, steps);
  std::vector<double> alpha;
  std::vector<double> beta;
  CVector w(dim);
  int m = 0;
  for (; m < steps; ++m) {
    basis.col(m) = q;
    op(q, w);
    const double a = std::real(q.dot(w));
    alpha.push_back(a);
    // Full reorthogonalization, applied twice.
    for (int pass = 0; pass < 2; ++pass) {
      const CVector coef = basis.leftCols(m + 1).adjoint() * w;
      w -= basis.leftCols(m + 1) * coef;
    }
    const double b = w.norm();
    beta.push_back(b);
    if (b < 1e-13) {
      ++m;
      break;
    }
    q = w / b;
  }

  RMatrix t = RMatrix::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    t(i, i) = alpha[i];
    if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[i];
  }
  Eigen::SelfAdjointEigenSolver<RMatrix> tri(t);
  LanczosResult out;
  out.ritz_values = tri.eigenvalues();
  out.residuals.resize(m);
  for (int i = 0; i < m; ++i) out.residuals(i) = std::abs(beta[m - 1] * tri.eigenvectors()(m - 1, i));
  return out;
}

double hermitian_operator_norm(const LinearOp& op, Eigen::Index dim, int steps,
                               std::uint64_t seed) {
  const LanczosResult r = lanczos(op, dim, steps, seed);
  if (r.ritz_values.size() == 0) return 0.0;
  return std::max(std::abs(r.ritz_values.minCoeff()), std::abs(r.ritz_values.maxCoeff()));
}

CVector chebyshev_propagate(const LinearOp& h, const CVector& v, double t, double e_min,
                            double e_max, double tol) {
  if (!(e_max > e_min)) throw NumericalError("chebyshev_propagate: empty spectral interval");
  const double half = 0.5 * (e_max - e_min);
  const double mid = 0.5 * (e_max + e_min);
  const double tau = half * std::abs(t);
  // exp(-i t (mid + half x)) = e^{-i t mid} sum_k c_k J_k(t half) T_k(x),
  // c_0 = 1, c_k = 2 (-i)^k sign(t)^k.
  const int kmax = static_cast<int>(tau + 10.0 * std::cbrt(tau + 1.0) + 40.0);
  auto scaled = [&](const CVector& in, CVector& out) {
    h(in, out);
    out = (out - mid * in) / half;
  };
  CVector t_prev = v;
  CVector t_cur(v.size());
  scaled(v, t_cur);
  const cplx sgn = t >= 0 ? cplx{0.0, -1.0} : cplx{0.0, 1.0};
  CVector acc = boost::math::cyl_bessel_j(0, tau) * v;
  cplx phase = sgn;
  acc += 2.0 * phase * boost::math::cyl_bessel_j(1, tau) * t_cur;
  CVector t_next(v.size());
  int k = 2;
  for (; k <= kmax; ++k) {
    scaled(t_cur, t_next);
    t_next = 2.0 * t_next - t_prev;
    phase *= sgn;
    const double jk = boost::math::cyl_bessel_j(k, tau);
    acc += 2.0 * phase * jk * t_next;
    t_prev.swap(t_cur);
    t_cur.swap(t_next);
    if (k > tau && std::abs(jk) < tol * 1e-3) break;
  }
  if (k > kmax) throw NumericalError("chebyshev_propagate: expansion did not converge");
  return std::polar(1.0, -t * mid) * acc;
}

SparseC to_sparse(const CMatrix& a, double drop) {
  std::vector<Eigen::Triplet<cplx>> trip;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      if (std::abs(a(i, j)) > drop) trip.emplace_back(i, j, a(i, j));
    }
  }
  SparseC s(a.rows(), a.cols());
  s.setFromTriplets(trip.begin(), trip.end());
  return s;
}

}  // namespace peierls
