#pragma once

// Twisted-Toeplitz ("magnetic") matrices: Peierls assembly, twisted products,
// covariance extraction, the first-order flux-moment correction and spectra.

#include <optional>
#include <vector>

#include "peierls/common.hpp"
#include "peierls/frame_builder.hpp"
#include "peierls/magnetic_frame.hpp"
#include "peierls/magnetic_geometry.hpp"

namespace peierls {

// Cell index set of a magnetic matrix: an open window |g|_inf <= L, or all
// cells of an M x M torus (wrapped with the magnetic boundary rule).
class CellWindow {
 public:
  static CellWindow open(int radius);
  static CellWindow torus(int m_cells);

  [[nodiscard]] bool is_torus() const { return torus_; }
  [[nodiscard]] int extent() const { return extent_; }  // L or M
  [[nodiscard]] const std::vector<LatticeVector>& cells() const { return cells_; }
  [[nodiscard]] std::size_t size() const { return cells_.size(); }
  [[nodiscard]] std::optional<std::size_t> ordinal(LatticeVector g) const;
  // 1 for cells with |g|_inf <= r (all cells for r < 0).
  [[nodiscard]] std::vector<bool> interior(int r) const;

 private:
  bool torus_ = false;
  int extent_ = 0;
  std::vector<LatticeVector> cells_;
};

struct MagneticMatrix {
  CellWindow window;
  int n = 0;
  CMatrix matrix;

  [[nodiscard]] CMatrix block(std::size_t a, std::size_t b) const {
    return matrix.block(static_cast<Eigen::Index>(a) * n, static_cast<Eigen::Index>(b) * n, n, n);
  }
};

// Lattice phase Lambda~^eps(a, b); constant part only unless `with_fluctuation`.
cplx lattice_phase(const MagneticFieldSpec& spec, LatticeVector a, LatticeVector b,
                   bool with_fluctuation = false);

// M_{ab} = Lambda~^eps(a, b) m_{a-b}; on a torus the images b + Ma are summed
// with the boundary factor chi(Ma) Lambda~(b, Ma).
MagneticMatrix assemble_peierls(const HoppingSequence& m, const MagneticFieldSpec& spec,
                                const CellWindow& window);

// Same with the composite phase Lambda~^{eps,c} Lambda~^{eps,0} (c > 0).
MagneticMatrix assemble_fluctuation(const HoppingSequence& m, const MagneticFieldSpec& spec,
                                    const CellWindow& window);

// [S T]_d = sum_g exp(-i (eps b / 2) g^d) S_g T_{d-g}
HoppingSequence twisted_product(const HoppingSequence& s, const HoppingSequence& t,
                                const MagneticFieldSpec& spec);

// M_{ab;pq} = <psi^eps_{a,p}, H psi^eps_{b,q}>
MagneticMatrix direct_matrix_elements(const TightFrameCorrection& c, const SparseC& h,
                                      const std::vector<LatticeVector>& torus_cells,
                                      int n_b);

struct CovarianceResult {
  HoppingSequence hopping;
  double residual = 0.0;
};

// Averages Lambda~(a, b)^{-1} M_{ab} over interior pairs with a - b = d, |d| <= radius.
CovarianceResult covariance_extract(const MagneticMatrix& m, const MagneticFieldSpec& spec,
                                    int interior_radius, int radius);

// First-order flux-moment block c1 with M_{ab} ~ Lambda~(a, b)(m_{a-b} + eps c1):
//   c1_pq = -i sum_{x,y} [F(a,x,y) + F(a,y,b)] conj(psi_p(x-a)) K(x,y) psi_q(y-b)
// with K the eps = 0 kernel and F the unscaled flux of B^eps, split through
// Phi_a and Phi_{a,b} into the three moment pairings.
CMatrix first_order_correction(const WannierFrame& w, const SparseC& h0,
                               const MagneticFieldSpec& spec, LatticeVector alpha,
                               LatticeVector beta, double support_cutoff = 1e-13);

struct WindowSpectrum {
  RVector values;
  RVector interior_weight;
};

// Dense eigendecomposition; weight = eigenvector mass on rows with mask = true.
WindowSpectrum window_spectrum(const CMatrix& m, const std::vector<bool>& row_mask);
WindowSpectrum window_spectrum(const MagneticMatrix& m, int interior_radius = -1);

// Harper sequence m_{+-e1} = m_{+-e2} = 1.
HoppingSequence harper_sequence();

struct ButterflyRow {
  double flux;
  double eigenvalue;
  double weight;
};

// Harper spectra on an M x M torus at flux j/q_max, j = 0..q_max-1 (needs q_max | M^2).
std::vector<ButterflyRow> harper_butterfly(int m_cells, int flux_points);

}  // namespace peierls
