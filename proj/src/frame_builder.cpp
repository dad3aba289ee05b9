#include "peierls/frame_builder.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "peierls/linalg.hpp"
#include "peierls/numerics.hpp"

namespace peierls {

FiberFrame build_fiber_frame(const BandStructure& bands, const IsolatedFamily& family,
                             const CMatrix& trials, double threshold) {
  const int rank = family.size();
  const int n_b = static_cast<int>(trials.cols());
  if (n_b < rank) throw ConfigError("fiber frame: need n_B >= N+1 trial vectors");
  if (trials.rows() != bands.dimension()) throw ConfigError("fiber frame: trial dimension mismatch");
  FiberFrame out;
  out.n_b = n_b;
  out.sections.resize(bands.grid.size());
  out.conditioning = std::numeric_limits<double>::infinity();
  std::size_t worst = 0;
  for (std::size_t i = 0; i < bands.grid.size(); ++i) {
    const CMatrix p = eigenprojection(bands, i, family.k0, family.k_last());
    const CMatrix w = p * trials;
    const EigenSystem g = hermitian_eigen(w.adjoint() * w);
    // The nonzero spectrum of S = W W^* is the top `rank` part of W^* W.
    const auto top = g.vectors.rightCols(rank);
    const RVector lam = g.values.tail(rank);
    if (lam(0) < out.conditioning) {
      out.conditioning = lam(0);
      worst = i;
    }
    const CMatrix f = top * lam.cwiseMax(1e-300).cwiseSqrt().cwiseInverse().asDiagonal() *
                      top.adjoint();
    out.sections[i] = w * f;
  }
  if (out.conditioning < threshold) {
    throw NumericalError("trial set degenerate (conditioning " + std::to_string(out.conditioning) +
                         " at node " + std::to_string(worst) + "); increase n_B or change trials");
  }
  return out;
}

FiberFrame build_default_fiber_frame(const BandStructure& bands, const IsolatedFamily& family,
                                     std::uint64_t seed) {
  const std::size_t origin = bands.grid.origin_index();
  CMatrix trials = bands.eigenvectors[origin].middleCols(family.k0 - 1, family.size());
  try {
    FiberFrame f = build_fiber_frame(bands, family, trials);
    f.seed = seed;
    return f;
  } catch (const NumericalError&) {
    // Escalate to N+2 sections with one pseudorandom unit trial.
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    CVector extra(trials.rows());
    for (Eigen::Index i = 0; i < extra.size(); ++i) extra(i) = {gauss(rng), gauss(rng)};
    extra.normalize();
    CMatrix wider(trials.rows(), trials.cols() + 1);
    wider << trials, extra;
    FiberFrame f = build_fiber_frame(bands, family, wider);
    f.seed = seed;
    return f;
  }
}

cplx WannierFrame::local_value(int p, int u1, int u2) const {
  if (!box.contains(u1, u2)) return {0.0, 0.0};
  return samples[p](box.index(u1, u2));
}

WannierFrame synthesize_wannier(const FiberFrame& frame, const BrillouinGrid& grid, int n_s,
                                int radius, double tail_tolerance) {
  const int m = grid.m_pts();
  if (m < 2 * radius + 8) throw ConfigError("synthesize_wannier: need M >= 2L+8");
  if (frame.sections.empty() || frame.sections[0].rows() != n_s * n_s) {
    throw ConfigError("synthesize_wannier: sections are not grid-backend fibers with this n_s");
  }
  WannierFrame w;
  w.n_b = frame.n_b;
  w.radius = radius;
  w.box = Supercell(m, n_s);
  const auto cells = w.box.cells();
  const int loc = n_s * n_s;
  for (int p = 0; p < frame.n_b; ++p) {
    CVector s = CVector::Zero(w.box.size());
#pragma omp parallel for
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const LatticeVector g = cells[c];
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const cplx e = std::conj(character(grid.node(i), g));
        for (int j = 0; j < loc; ++j) s(w.box.index(g, j)) += e * frame.sections[i](j, p);
      }
    }
    w.samples.push_back(s * grid.weight());
  }
  w.decay_profile.assign(m / 2 + 1, 0.0);
  for (const auto& s : w.samples) {
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      const int r = w.box.cell(i).sup_norm();
      w.decay_profile[r] = std::max(w.decay_profile[r], std::abs(s(i)));
    }
  }
  const double peak = *std::max_element(w.decay_profile.begin(), w.decay_profile.end());
  const double tail = std::max(w.decay_profile[m / 2], w.decay_profile[m / 2 - 1]);
  if (tail > tail_tolerance * peak) {
    throw NumericalError("synthesize_wannier: frame tail " + std::to_string(tail / peak) +
                         " relative at the box edge; periodization images not negligible");
  }
  return w;
}

CVector translated_wannier(const WannierFrame& w, int p, LatticeVector g) {
  const Supercell& box = w.box;
  CVector out(box.size());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    auto [u1, u2] = box.coords(i);
    u1 -= g.n1 * box.n_s();
    u2 -= g.n2 * box.n_s();
    box.fold(u1, u2);
    out(i) = w.samples[p](box.index(u1, u2));
  }
  return out;
}

namespace {

// Rows: box cells (ordinal); columns: local sites.
CMatrix cell_major(const CVector& f, const Supercell& box) {
  const auto cells = box.cells();
  CMatrix out(cells.size(), box.local_size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (int j = 0; j < box.local_size(); ++j) out(c, j) = f(box.index(cells[c], j));
  }
  return out;
}

std::size_t periodic_ordinal(const Supercell& box, LatticeVector g) {
  const int m = box.m_cells();
  const int a = ((g.n1 + m / 2) % m + m) % m;
  const int b = ((g.n2 + m / 2) % m + m) % m;
  return static_cast<std::size_t>(a) * m + b;
}

}  // namespace

FrameCoordinates frame_analysis(const CVector& f, const WannierFrame& w) {
  if (f.size() != w.box.size()) throw ConfigError("frame_analysis: sample count mismatch");
  FrameCoordinates out;
  out.cells = w.box.cells();
  out.n_b = w.n_b;
  out.coefficients = CVector::Zero(static_cast<Eigen::Index>(out.cells.size()) * w.n_b);
  const CMatrix fm = cell_major(f, w.box);
  for (int p = 0; p < w.n_b; ++p) {
    const CMatrix pm = cell_major(w.samples[p], w.box);
    // <psi_p(. - g), f> = sum_c <psi_p[c - g], f[c]>
    const CMatrix overlaps = pm.conjugate() * fm.transpose();  // [c'][c]
#pragma omp parallel for
    for (std::size_t gi = 0; gi < out.cells.size(); ++gi) {
      const LatticeVector g = out.cells[gi];
      cplx acc{0.0, 0.0};
      for (std::size_t c = 0; c < out.cells.size(); ++c) {
        acc += overlaps(static_cast<Eigen::Index>(periodic_ordinal(w.box, out.cells[c] - g)),
                        static_cast<Eigen::Index>(c));
      }
      out.coefficients(static_cast<Eigen::Index>(gi) * w.n_b + p) = acc;
    }
  }
  return out;
}

CVector frame_synthesis(const FrameCoordinates& c, const WannierFrame& w) {
  const auto cells = w.box.cells();
  if (c.coefficients.size() != static_cast<Eigen::Index>(cells.size()) * w.n_b) {
    throw ConfigError("frame_synthesis: coefficient count mismatch");
  }
  CMatrix out = CMatrix::Zero(cells.size(), w.box.local_size());
  for (int p = 0; p < w.n_b; ++p) {
    const CMatrix pm = cell_major(w.samples[p], w.box);
    for (std::size_t gi = 0; gi < cells.size(); ++gi) {
      const cplx coef = c.coefficients(static_cast<Eigen::Index>(gi) * w.n_b + p);
      if (coef == cplx{0.0, 0.0}) continue;
      for (std::size_t cc = 0; cc < cells.size(); ++cc) {
        out.row(cc) += coef * pm.row(periodic_ordinal(w.box, cells[cc] - cells[gi]));
      }
    }
  }
  CVector f(w.box.size());
  for (std::size_t cc = 0; cc < cells.size(); ++cc) {
    for (int j = 0; j < w.box.local_size(); ++j) f(w.box.index(cells[cc], j)) = out(cc, j);
  }
  return f;
}

CMatrix frame_matrix(const WannierFrame& w) {
  const auto cells = w.box.cells();
  CMatrix out(w.box.size(), static_cast<Eigen::Index>(cells.size()) * w.n_b);
  for (std::size_t gi = 0; gi < cells.size(); ++gi) {
    for (int p = 0; p < w.n_b; ++p) {
      out.col(static_cast<Eigen::Index>(gi) * w.n_b + p) = translated_wannier(w, p, cells[gi]);
    }
  }
  return out;
}

TightFrame tighten_frame(const CMatrix& v, double rank_tolerance) {
  if (v.cols() == 0 || v.norm() == 0.0) throw ConfigError("tighten_frame: no nonzero vectors");
  const EigenSystem g = hermitian_eigen(v.adjoint() * v);
  const double top = g.values.maxCoeff();
  TightFrame out;
  RVector f = RVector::Zero(g.values.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    if (g.values(i) > rank_tolerance * top) {
      f(i) = 1.0 / std::sqrt(g.values(i));
      ++out.rank;
    }
  }
  out.coefficients = g.vectors * f.asDiagonal() * g.vectors.adjoint();
  out.vectors = v * out.coefficients;
  return out;
}

FrameBounds frame_bounds(const CMatrix& v, double rank_tolerance) {
  const RVector ev = hermitian_eigenvalues(v.adjoint() * v);
  const double top = ev.maxCoeff();
  double low = top;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > rank_tolerance * top) low = std::min(low, ev(i));
  }
  return {low, top};
}

CMatrix HoppingSequence::at(LatticeVector g) const {
  auto it = entries.find(g);
  return it == entries.end() ? CMatrix::Zero(n, n) : it->second;
}

double HoppingSequence::hermitian_defect() const {
  double d = 0.0;
  for (const auto& [g, m] : entries) d = std::max(d, (at(-g) - m.adjoint()).cwiseAbs().maxCoeff());
  return d;
}

double HoppingSequence::decay_exponent() const {
  std::vector<double> x, y;
  for (const auto& [g, m] : entries) {
    const double nrm = m.norm();
    if (g.sup_norm() == 0 || nrm < 1e-300) continue;
    x.push_back(std::sqrt(1.0 + g.n1 * g.n1 + g.n2 * g.n2));
    y.push_back(nrm);
  }
  if (x.size() < 2) return std::numeric_limits<double>::infinity();
  return -loglog_slope(x, y);
}

namespace {

std::vector<CMatrix> hopping_symbol(const BandStructure& bands, const IsolatedFamily& family,
                                    const FiberFrame& frame) {
  std::vector<CMatrix> sym(bands.grid.size());
  for (std::size_t i = 0; i < sym.size(); ++i) {
    const CMatrix& v = bands.eigenvectors[i];
    const auto vb = v.middleCols(family.k0 - 1, family.size());
    const RVector lam = bands.eigenvalues.row(static_cast<Eigen::Index>(i))
                            .segment(family.k0 - 1, family.size())
                            .transpose();
    const CMatrix proj = vb.adjoint() * frame.sections[i];
    sym[i] = proj.adjoint() * lam.asDiagonal() * proj;
  }
  return sym;
}

}  // namespace

HoppingSequence hopping_from_bands(const BandStructure& bands, const IsolatedFamily& family,
                                   const FiberFrame& frame, int radius) {
  const int m = bands.grid.m_pts();
  if (m < 2 * radius + 8) throw ConfigError("hopping_from_bands: need M >= 2 R_h + 8");
  const std::vector<CMatrix> sym = hopping_symbol(bands, family, frame);
  HoppingSequence out;
  out.n = frame.n_b;
  out.radius = radius;
  for (int g1 = -radius; g1 <= radius; ++g1) {
    for (int g2 = -radius; g2 <= radius; ++g2) {
      out.entries[{g1, g2}] = torus_fourier(sym, bands.grid, {g1, g2});
    }
  }
  if (radius + 1 <= m / 2) {
    for (int g1 = -radius - 1; g1 <= radius + 1; ++g1) {
      for (int g2 = -radius - 1; g2 <= radius + 1; ++g2) {
        if (LatticeVector{g1, g2}.sup_norm() != radius + 1) continue;
        out.tail = std::max(out.tail, spectral_norm(torus_fourier(sym, bands.grid, {g1, g2})));
      }
    }
  }
  return out;
}

int hopping_radius(const BandStructure& bands, const IsolatedFamily& family,
                   const FiberFrame& frame, double cutoff) {
  const int max_r = (bands.grid.m_pts() - 8) / 2;
  const std::vector<CMatrix> sym = hopping_symbol(bands, family, frame);
  int r_needed = 0;
  for (int g1 = -bands.grid.m_pts() / 2; g1 < bands.grid.m_pts() / 2; ++g1) {
    for (int g2 = -bands.grid.m_pts() / 2; g2 < bands.grid.m_pts() / 2; ++g2) {
      const LatticeVector g{g1, g2};
      if (spectral_norm(torus_fourier(sym, bands.grid, g)) >= cutoff) {
        r_needed = std::max(r_needed, g.sup_norm());
      }
    }
  }
  return std::min(r_needed, max_r);
}

std::vector<LatticeVector> window_cells(int window) {
  std::vector<LatticeVector> out;
  for (int g1 = -window; g1 <= window; ++g1) {
    for (int g2 = -window; g2 <= window; ++g2) out.push_back({g1, g2});
  }
  return out;
}

CMatrix flat_quantization(const HoppingSequence& m, int window) {
  const auto cells = window_cells(window);
  const auto k = static_cast<Eigen::Index>(cells.size());
  CMatrix out = CMatrix::Zero(k * m.n, k * m.n);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) {
      const LatticeVector d = cells[a] - cells[b];
      if (d.sup_norm() > m.radius) continue;
      out.block(a * m.n, b * m.n, m.n, m.n) = m.at(d);
    }
  }
  return out;
}

}  // namespace peierls
