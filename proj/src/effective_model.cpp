#include "peierls/effective_model.hpp"

#include <algorithm>
#include <cmath>

#include "peierls/linalg.hpp"

namespace peierls {

CellWindow CellWindow::open(int radius) {
  if (radius < 0) throw ConfigError("window radius must be >= 0");
  CellWindow w;
  w.extent_ = radius;
  w.cells_ = window_cells(radius);
  return w;
}

CellWindow CellWindow::torus(int m_cells) {
  CellWindow w;
  w.torus_ = true;
  w.extent_ = m_cells;
  w.cells_ = Supercell(m_cells, 1).cells();
  return w;
}

std::optional<std::size_t> CellWindow::ordinal(LatticeVector g) const {
  if (torus_) {
    const int h = extent_ / 2;
    if (g.n1 < -h || g.n1 >= h || g.n2 < -h || g.n2 >= h) return std::nullopt;
    return static_cast<std::size_t>(g.n1 + h) * extent_ + static_cast<std::size_t>(g.n2 + h);
  }
  if (g.sup_norm() > extent_) return std::nullopt;
  const int side = 2 * extent_ + 1;
  return static_cast<std::size_t>(g.n1 + extent_) * side + static_cast<std::size_t>(g.n2 + extent_);
}

std::vector<bool> CellWindow::interior(int r) const {
  std::vector<bool> out(cells_.size());
  for (std::size_t i = 0; i < cells_.size(); ++i) out[i] = r < 0 || cells_[i].sup_norm() <= r;
  return out;
}

cplx lattice_phase(const MagneticFieldSpec& spec, LatticeVector a, LatticeVector b,
                   bool with_fluctuation) {
  if (with_fluctuation && spec.has_fluctuation()) {
    return line_phase(GaugePotential::perturbing(spec), to_point(a), to_point(b));
  }
  return constant_phase(spec.epsilon * spec.constant_b, to_point(a), to_point(b));
}

namespace {

MagneticMatrix assemble(const HoppingSequence& m, const MagneticFieldSpec& spec,
                        const CellWindow& window, bool with_fluctuation) {
  MagneticMatrix out{window, m.n, CMatrix::Zero(static_cast<Eigen::Index>(window.size()) * m.n,
                                                static_cast<Eigen::Index>(window.size()) * m.n)};
  const auto& cells = window.cells();
  std::optional<MagneticTorus> torus;
  if (window.is_torus()) torus.emplace(Supercell(window.extent(), 1), spec);
  const double eps_b = spec.epsilon * spec.constant_b;
  const int big = window.extent();
#pragma omp parallel for schedule(static)
  for (std::size_t a = 0; a < cells.size(); ++a) {
    for (std::size_t b = 0; b < cells.size(); ++b) {
      CMatrix blk = CMatrix::Zero(m.n, m.n);
      if (!torus) {
        const LatticeVector d = cells[a] - cells[b];
        if (d.sup_norm() > m.radius) continue;
        blk = lattice_phase(spec, cells[a], cells[b], with_fluctuation) * m.at(d);
      } else {
        for (int a1 = -1; a1 <= 1; ++a1) {
          for (int a2 = -1; a2 <= 1; ++a2) {
            const LatticeVector ma{big * a1, big * a2};
            const LatticeVector img = cells[b] + ma;
            const LatticeVector d = cells[a] - img;
            if (d.sup_norm() > m.radius) continue;
            const cplx wrap = torus->chi({a1, a2}) *
                              constant_phase(eps_b, to_point(cells[b]), to_point(ma));
            blk += wrap * lattice_phase(spec, cells[a], img, with_fluctuation) * m.at(d);
          }
        }
      }
      out.matrix.block(static_cast<Eigen::Index>(a) * m.n, static_cast<Eigen::Index>(b) * m.n,
                       m.n, m.n) = blk;
    }
  }
  return out;
}

}  // namespace

MagneticMatrix assemble_peierls(const HoppingSequence& m, const MagneticFieldSpec& spec,
                                const CellWindow& window) {
  return assemble(m, spec, window, false);
}

MagneticMatrix assemble_fluctuation(const HoppingSequence& m, const MagneticFieldSpec& spec,
                                    const CellWindow& window) {
  return assemble(m, spec, window, true);
}

HoppingSequence twisted_product(const HoppingSequence& s, const HoppingSequence& t,
                                const MagneticFieldSpec& spec) {
  if (s.n != t.n) throw ConfigError("twisted_product: block sizes differ");
  const double eps_b = spec.epsilon * spec.constant_b;
  HoppingSequence out;
  out.n = s.n;
  out.radius = s.radius + t.radius;
  for (const auto& [g, sg] : s.entries) {
    for (const auto& [h, th] : t.entries) {
      const LatticeVector d = g + h;
      const cplx ph = constant_phase(eps_b, to_point(g), to_point(d));
      auto it = out.entries.find(d);
      if (it == out.entries.end()) it = out.entries.emplace(d, CMatrix::Zero(s.n, s.n)).first;
      it->second += ph * sg * th;
    }
  }
  return out;
}

MagneticMatrix direct_matrix_elements(const TightFrameCorrection& c, const SparseC& h,
                                      const std::vector<LatticeVector>& torus_cells, int n_b) {
  const int m = static_cast<int>(std::lround(std::sqrt(static_cast<double>(torus_cells.size()))));
  MagneticMatrix out{CellWindow::torus(m), n_b, CMatrix()};
  const CMatrix hv = h * c.vectors;
  out.matrix = c.vectors.adjoint() * hv;
  out.matrix = 0.5 * (out.matrix + out.matrix.adjoint()).eval();
  return out;
}

CovarianceResult covariance_extract(const MagneticMatrix& m, const MagneticFieldSpec& spec,
                                    int interior_radius, int radius) {
  CovarianceResult r;
  r.hopping.n = m.n;
  r.hopping.radius = radius;
  const auto& cells = m.window.cells();
  for (int d1 = -radius; d1 <= radius; ++d1) {
    for (int d2 = -radius; d2 <= radius; ++d2) {
      const LatticeVector d{d1, d2};
      std::vector<CMatrix> samples;
      for (std::size_t a = 0; a < cells.size(); ++a) {
        if (cells[a].sup_norm() > interior_radius) continue;
        const LatticeVector b = cells[a] - d;
        if (b.sup_norm() > interior_radius) continue;
        const auto bo = m.window.ordinal(b);
        if (!bo) continue;
        samples.push_back(std::conj(lattice_phase(spec, cells[a], b)) * m.block(a, *bo));
      }
      if (samples.empty()) continue;
      CMatrix avg = CMatrix::Zero(m.n, m.n);
      for (const auto& s : samples) avg += s;
      avg /= static_cast<double>(samples.size());
      for (const auto& s : samples) r.residual = std::max(r.residual, (s - avg).cwiseAbs().maxCoeff());
      r.hopping.entries[d] = avg;
    }
  }
  return r;
}

CMatrix first_order_correction(const WannierFrame& w, const SparseC& h0,
                               const MagneticFieldSpec& spec, LatticeVector alpha,
                               LatticeVector beta, double support_cutoff) {
  const Supercell& box = w.box;
  if (h0.rows() != box.size()) throw ConfigError("first_order_correction: kernel/box mismatch");
  const int ns = box.n_s();
  const int side = box.side();
  const Point2 ap = to_point(alpha);
  const Point2 bp = to_point(beta);
  double peak = 0.0;
  for (const auto& s : w.samples) peak = std::max(peak, s.cwiseAbs().maxCoeff());
  const double floor = support_cutoff * peak;

  CMatrix out = CMatrix::Zero(w.n_b, w.n_b);
  auto wrap = [side](int d) {
    d %= side;
    if (d >= side / 2) d -= side;
    if (d < -side / 2) d += side;
    return d;
  };
  for (Eigen::Index i = 0; i < box.size(); ++i) {
    const auto [u1, u2] = box.coords(i);
    std::vector<cplx> left(w.n_b);
    bool any = false;
    for (int p = 0; p < w.n_b; ++p) {
      left[p] = std::conj(w.local_value(p, u1 - alpha.n1 * ns, u2 - alpha.n2 * ns));
      any = any || std::abs(left[p]) > floor;
    }
    if (!any) continue;
    const Point2 x = box.position(u1, u2);
    for (SparseC::InnerIterator it(h0, i); it; ++it) {
      const auto [c1, c2] = box.coords(it.col());
      const int y1 = u1 + wrap(c1 - u1);
      const int y2 = u2 + wrap(c2 - u2);
      const Point2 y = box.position(y1, y2);
      const double phi_a = flux_moment_phi(spec, ap, x, y);
      const double phi_ab = flux_moment_phi2(spec, ap, bp, y);
      // Three pairings: Phi_a (x-a)^(y-b), Phi_a (x-a)^(b-a), Phi_{a,b} (b-a)^(y-b).
      const double flux = phi_a * wedge(x - ap, y - bp) + phi_a * wedge(x - ap, bp - ap) -
                          phi_ab * wedge(bp - ap, y - bp);
      for (int q = 0; q < w.n_b; ++q) {
        const cplx right = w.local_value(q, y1 - beta.n1 * ns, y2 - beta.n2 * ns);
        if (right == cplx{0.0, 0.0}) continue;
        for (int p = 0; p < w.n_b; ++p) out(p, q) += -kI * flux * left[p] * it.value() * right;
      }
    }
  }
  return out;
}

WindowSpectrum window_spectrum(const CMatrix& m, const std::vector<bool>& row_mask) {
  if (static_cast<Eigen::Index>(row_mask.size()) != m.rows()) {
    throw ConfigError("window_spectrum: mask size mismatch");
  }
  const EigenSystem es = hermitian_eigen(m);
  WindowSpectrum out{es.values, RVector::Zero(es.values.size())};
  for (Eigen::Index k = 0; k < es.values.size(); ++k) {
    double acc = 0.0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      if (row_mask[r]) acc += std::norm(es.vectors(r, k));
    }
    out.interior_weight(k) = acc;
  }
  return out;
}

WindowSpectrum window_spectrum(const MagneticMatrix& m, int interior_radius) {
  const auto cell_mask = m.window.interior(interior_radius);
  std::vector<bool> rows;
  rows.reserve(cell_mask.size() * m.n);
  for (bool b : cell_mask) rows.insert(rows.end(), m.n, b);
  return window_spectrum(m.matrix, rows);
}

HoppingSequence harper_sequence() {
  HoppingSequence h;
  h.n = 1;
  h.radius = 1;
  const CMatrix one = CMatrix::Ones(1, 1);
  h.entries[{1, 0}] = one;
  h.entries[{-1, 0}] = one;
  h.entries[{0, 1}] = one;
  h.entries[{0, -1}] = one;
  return h;
}

std::vector<ButterflyRow> harper_butterfly(int m_cells, int flux_points) {
  if (flux_points < 1) throw ConfigError("butterfly: need at least one flux value");
  const long m2 = static_cast<long>(m_cells) * m_cells;
  if (m2 % flux_points != 0) {
    throw ConfigError("butterfly: flux grid j/q needs q | M^2 for torus quantization");
  }
  std::vector<std::vector<ButterflyRow>> per(flux_points);
  const HoppingSequence harper = harper_sequence();
  const CellWindow window = CellWindow::torus(m_cells);
#pragma omp parallel for schedule(dynamic)
  for (int j = 0; j < flux_points; ++j) {
    const double flux = static_cast<double>(j) / flux_points;
    MagneticFieldSpec spec;
    spec.epsilon = 1.0;
    spec.constant_b = kTwoPi * flux;
    const MagneticMatrix mm = assemble_peierls(harper, spec, window);
    const WindowSpectrum ws = window_spectrum(mm);
    for (Eigen::Index k = 0; k < ws.values.size(); ++k) {
      per[j].push_back({flux, ws.values(k), ws.interior_weight(k)});
    }
  }
  std::vector<ButterflyRow> rows;
  for (auto& v : per) rows.insert(rows.end(), v.begin(), v.end());
  return rows;
}

}  // namespace peierls
