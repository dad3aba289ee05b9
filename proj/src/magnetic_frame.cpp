#include "peierls/magnetic_frame.hpp"

#include <cmath>

namespace peierls {

MagneticFrame build_magnetic_frame(const WannierFrame& w, const MagneticTorus& torus) {
  const Supercell& box = torus.box();
  if (box.m_cells() != w.box.m_cells() || box.n_s() != w.box.n_s()) {
    throw ConfigError("build_magnetic_frame: Wannier box and torus differ");
  }
  MagneticFrame f{torus, w.n_b, box.cells(), CMatrix()};
  const auto k = static_cast<Eigen::Index>(f.cells.size());
  f.vectors.resize(box.size(), k * w.n_b);
  const double m = box.m_cells();
#pragma omp parallel for schedule(static)
  for (Eigen::Index c = 0; c < k; ++c) {
    const LatticeVector beta = f.cells[c];
    const Point2 bp = to_point(beta);
    for (Eigen::Index i = 0; i < box.size(); ++i) {
      const auto [u1, u2] = box.coords(i);
      int z1 = u1 - beta.n1 * box.n_s();
      int z2 = u2 - beta.n2 * box.n_s();
      const LatticeVector a = box.fold(z1, z2);
      const Point2 x = box.position(i);
      cplx phase{1.0, 0.0};
      Point2 xs = x;
      if (a.n1 != 0 || a.n2 != 0) {
        const Point2 ma{m * a.n1, m * a.n2};
        phase = torus.chi(a) * constant_phase(torus.eps_b(), x, ma);
        xs = x - ma;
      }
      phase *= torus.lambda(xs, bp);
      for (int p = 0; p < w.n_b; ++p) {
        f.vectors(i, c * w.n_b + p) = phase * w.samples[p](box.index(z1, z2));
      }
    }
  }
  return f;
}

GramSpectrum gram_spectrum(const MagneticFrame& frame) {
  GramSpectrum g;
  g.gram = frame.vectors.adjoint() * frame.vectors;
  g.eigen = hermitian_eigen(g.gram);
  const RVector& ev = g.eigen.values;
  g.min_eigenvalue = ev.minCoeff();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    const double z = ev(i);
    if (z > 0.5) {
      ++g.near_one;
    } else {
      ++g.near_zero;
    }
    g.half_width = std::max(g.half_width, std::min(std::abs(z), std::abs(z - 1.0)));
    g.idempotency_defect = std::max(g.idempotency_defect, std::abs(z * z - z));
  }
  const double eps = frame.torus.spec().epsilon;
  g.c_q = eps > 0.0 ? g.half_width / eps : 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) >= 0.25 && ev(i) <= 0.75) {
      throw NumericalError("gram cluster separation failed at eps = " + std::to_string(eps) +
                           " (eigenvalue " + std::to_string(ev(i)) +
                           "); eps too large for this window");
    }
  }
  return g;
}

TightFrameCorrection tighten_magnetic_frame(const MagneticFrame& frame, const GramSpectrum& gram) {
  const RVector& ev = gram.eigen.values;
  RVector f = RVector::Zero(ev.size());
  TightFrameCorrection c;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > 0.5) {
      f(i) = 1.0 / std::sqrt(ev(i));
      ++c.rank;
    }
  }
  c.coefficients = gram.eigen.vectors * f.asDiagonal() * gram.eigen.vectors.adjoint();
  c.vectors = frame.vectors * c.coefficients;
  const CMatrix gp = c.vectors.adjoint() * c.vectors;
  const RVector gev = hermitian_eigenvalues(gp);
  for (Eigen::Index i = 0; i < gev.size(); ++i) {
    c.gram_idempotency = std::max(c.gram_idempotency, std::abs(gev(i) * gev(i) - gev(i)));
  }
  return c;
}

CVector apply_projection(const TightFrameCorrection& c, const CVector& v) {
  return c.vectors * (c.vectors.adjoint() * v);
}

double projector_commutator_norm(const TightFrameCorrection& c, const SparseC& h,
                                 const std::optional<RVector>& mask, int steps) {
  auto op = [&](const CVector& in, CVector& out) {
    CVector v = in;
    if (mask) v = v.cwiseProduct(mask->cast<cplx>());
    const CVector hp = h * apply_projection(c, v);
    const CVector ph = apply_projection(c, CVector(h * v));
    out = kI * (hp - ph);
    if (mask) out = out.cwiseProduct(mask->cast<cplx>());
  };
  return hermitian_operator_norm(op, h.rows(), steps);
}

double zak_commutator_norm(const TightFrameCorrection& c, const MagneticTorus& torus,
                           const std::vector<LatticeVector>& shifts, int steps) {
  double worst = 0.0;
  for (const auto& g : shifts) {
    auto comm = [&](const CVector& v, LatticeVector s) {
      return CVector(apply_projection(c, torus.translate(v, s)) -
                     torus.translate(apply_projection(c, v), s));
    };
    // C^* C with C = P T_g - T_g P and T_g^* = T_{-g}.
    auto op = [&](const CVector& in, CVector& out) { out = -comm(comm(in, g), -g); };
    worst = std::max(worst, std::sqrt(std::max(
                                0.0, hermitian_operator_norm(op, torus.box().size(), steps))));
  }
  return worst;
}

double spectral_flattening_check(const TightFrameCorrection& c, const EigenSystem& h,
                                 const std::function<double(double)>& phi) {
  std::vector<Eigen::Index> keep;
  std::vector<double> w;
  for (Eigen::Index i = 0; i < h.values.size(); ++i) {
    const double v = phi(h.values(i));
    if (v != 0.0) {
      keep.push_back(i);
      w.push_back(v);
    }
  }
  if (keep.empty()) throw NumericalError("spectral_flattening_check: phi vanishes on sigma(H)");
  CMatrix vs(h.vectors.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) vs.col(j) = w[j] * h.vectors.col(keep[j]);
  const CMatrix defect = vs - c.vectors * (c.vectors.adjoint() * vs);
  return spectral_norm(defect);
}

}  // namespace peierls
