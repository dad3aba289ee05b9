#include "peierls/bloch_fibers.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "peierls/linalg.hpp"

namespace peierls {

namespace {

using IntKey = std::pair<int, int>;

IntKey integer_key(DualVector k, const char* what) {
  const double r1 = std::round(k.k1);
  const double r2 = std::round(k.k2);
  if (std::abs(r1 - k.k1) > 1e-12 || std::abs(r2 - k.k2) > 1e-12) {
    throw ConfigError(std::string(what) + ": periodic modes need integer wave vectors");
  }
  return {static_cast<int>(r1), static_cast<int>(r2)};
}

CMatrix planewave_fiber(const PeriodicModel& model, TorusPoint theta) {
  const int k = model.backend.cutoff_k;
  const int side = 2 * k + 1;
  const int dim = side * side;
  std::map<IntKey, cplx> w;
  for (const auto& m : model.potential_modes) w[integer_key(m.k, "potential")] += m.value;
  std::map<IntKey, std::pair<cplx, cplx>> a;
  for (const auto& m : periodic_potential_from_field(model.background_field_modes).modes()) {
    auto& slot = a[integer_key(m.k, "background")];
    slot.first += m.a1;
    slot.second += m.a2;
  }
  // (A.A)^(d) = sum_kappa A(kappa).A(d - kappa)
  std::map<IntKey, cplx> a_sq;
  for (const auto& [k1, v1] : a) {
    for (const auto& [k2, v2] : a) {
      a_sq[{k1.first + k2.first, k1.second + k2.second}] +=
          v1.first * v2.first + v1.second * v2.second;
    }
  }
  auto lookup = [](const auto& table, IntKey key) {
    auto it = table.find(key);
    return it == table.end() ? typename std::decay_t<decltype(table)>::mapped_type{} : it->second;
  };

  CMatrix h = CMatrix::Zero(dim, dim);
  for (int r = 0; r < dim; ++r) {
    const int g1 = r / side - k;
    const int g2 = r % side - k;
    const double p1 = kTwoPi * (theta.t1 + g1);
    const double p2 = kTwoPi * (theta.t2 + g2);
    h(r, r) += p1 * p1 + p2 * p2 + model.energy_shift;
    for (int c = 0; c < dim; ++c) {
      const int b1 = c / side - k;
      const int b2 = c % side - k;
      const IntKey d{g1 - b1, g2 - b2};
      h(r, c) += lookup(w, d);
      if (!a.empty()) {
        const auto ad = lookup(a, d);
        const double q1 = kTwoPi * (theta.t1 + b1);
        const double q2 = kTwoPi * (theta.t2 + b2);
        h(r, c) -= (p1 + q1) * ad.first + (p2 + q2) * ad.second;
        h(r, c) += lookup(a_sq, d);
      }
    }
  }
  return h;
}

CMatrix grid_fiber(const PeriodicModel& model, TorusPoint theta) {
  const int ns = model.backend.n_s;
  const int dim = ns * ns;
  const double t = static_cast<double>(ns) * ns;
  const GaugePotential a0 = GaugePotential::background(model.background_field_modes);
  const bool magnetic = !a0.periodic().empty();
  CMatrix h = CMatrix::Zero(dim, dim);
  const int steps[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  for (int j1 = 0; j1 < ns; ++j1) {
    for (int j2 = 0; j2 < ns; ++j2) {
      const int r = j1 * ns + j2;
      const Point2 x{static_cast<double>(j1) / ns, static_cast<double>(j2) / ns};
      h(r, r) += 4.0 * t + model.potential(x) + model.energy_shift;
      for (const auto& s : steps) {
        const int v1 = j1 + s[0];
        const int v2 = j2 + s[1];
        const LatticeVector g{floor_div(v1, ns), floor_div(v2, ns)};
        const int c = (v1 - g.n1 * ns) * ns + (v2 - g.n2 * ns);
        cplx link = std::polar(1.0, pairing(theta, g));
        if (magnetic) {
          const Point2 y{static_cast<double>(v1) / ns, static_cast<double>(v2) / ns};
          link *= line_phase(a0, x, y);
        }
        h(r, c) -= t * link;
      }
    }
  }
  return h;
}

}  // namespace

std::string Backend::tag() const {
  return kind == Kind::planewave ? "planewave:K=" + std::to_string(cutoff_k)
                                 : "grid:n_s=" + std::to_string(n_s);
}

void PeriodicModel::validate() const {
  require_hermitian_modes(potential_modes, "potential");
  require_hermitian_modes(background_field_modes, "background_field");
  for (const auto& m : potential_modes) integer_key(m.k, "potential");
  for (const auto& m : background_field_modes) {
    integer_key(m.k, "background_field");
    if (m.k.k1 == 0.0 && m.k.k2 == 0.0 && std::abs(m.value) > 1e-14) {
      throw ConfigError("background field has nonzero mean flux per cell (zero-flux condition)");
    }
  }
  if (backend.kind == Backend::Kind::planewave && backend.cutoff_k < 1) {
    throw ConfigError("planewave backend needs cutoff K >= 1");
  }
  if (backend.kind == Backend::Kind::grid && backend.n_s < 2) {
    throw ConfigError("grid backend needs n_s >= 2");
  }
}

std::size_t PeriodicModel::fiber_dimension() const {
  if (backend.kind == Backend::Kind::planewave) {
    const std::size_t side = 2 * backend.cutoff_k + 1;
    return side * side;
  }
  return static_cast<std::size_t>(backend.n_s) * backend.n_s;
}

std::vector<FourierMode> cosine_potential(double mu) {
  return {{{1, 0}, mu}, {{-1, 0}, mu}, {{0, 1}, mu}, {{0, -1}, mu}};
}

FiberOperator assemble_fiber(const PeriodicModel& model, TorusPoint theta) {
  model.validate();
  if (model.backend.kind == Backend::Kind::planewave) return {theta, planewave_fiber(model, theta)};
  return {theta, grid_fiber(model, theta)};
}

double free_mode_ceiling(const Backend& backend) {
  if (backend.kind == Backend::Kind::planewave) {
    // Smallest free energy among the outermost retained shell.
    const double k = backend.cutoff_k;
    return kTwoPi * kTwoPi * (k - 0.5) * (k - 0.5);
  }
  return 8.0 * backend.n_s * backend.n_s;
}

bool resolution_ok(const PeriodicModel& model, double e_plus) {
  return free_mode_ceiling(model.backend) - model.energy_shift >= 4.0 * e_plus;
}

BandStructure compute_bands(const PeriodicModel& model, const BrillouinGrid& grid, int n_bands) {
  model.validate();
  const auto dim = static_cast<int>(model.fiber_dimension());
  if (n_bands < 1 || n_bands > dim) throw ConfigError("compute_bands: n_bands out of range");
  BandStructure out;
  out.grid = grid;
  out.backend = model.backend.tag();
  const auto nodes = static_cast<Eigen::Index>(grid.size());
  out.eigenvalues.resize(nodes, n_bands);
  out.eigenvectors.resize(nodes);
  std::string failure;
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index i = 0; i < nodes; ++i) {
    try {
      const FiberOperator f = assemble_fiber(model, grid.node(i));
      const EigenSystem es = hermitian_eigen(f.matrix);
      out.eigenvalues.row(i) = es.values.head(n_bands).transpose();
      out.eigenvectors[i] = es.vectors.leftCols(n_bands);
    } catch (const std::exception& e) {
#pragma omp critical
      failure = "node " + std::to_string(i) + ": " + e.what();
    }
  }
  if (!failure.empty()) throw NumericalError("compute_bands: eigensolver failed at " + failure);
  return out;
}

PeriodicModel calibrate_energy_shift(const PeriodicModel& model, const BrillouinGrid& grid,
                                     double e0) {
  PeriodicModel m = model;
  m.energy_shift = 0.0;
  const BandStructure b = compute_bands(m, grid, 1);
  m.energy_shift = e0 - b.eigenvalues.col(0).minCoeff();
  return m;
}

CMatrix eigenprojection(const BandStructure& bands, std::size_t node, int k_first, int k_last) {
  if (k_first < 1 || k_last < k_first || k_last > bands.n_bands()) {
    throw ConfigError("eigenprojection: band range outside computed bands");
  }
  const auto row = bands.eigenvalues.row(static_cast<Eigen::Index>(node));
  auto separated = [&](int lo, int hi) {  // 1-based neighbours
    const double a = row(lo - 1);
    const double b = row(hi - 1);
    return (b - a) > 1e-8 * std::max(1.0, std::abs(b));
  };
  if ((k_first > 1 && !separated(k_first - 1, k_first)) ||
      (k_last < bands.n_bands() && !separated(k_last, k_last + 1))) {
    throw NumericalError("eigenprojection: degenerate cluster straddles the band range at node " +
                         std::to_string(node));
  }
  const CMatrix& v = bands.eigenvectors[node];
  const auto cols = v.middleCols(k_first - 1, k_last - k_first + 1);
  return cols * cols.adjoint();
}

IsolatedFamily detect_isolated_family(const BandStructure& bands, int k0, int n) {
  if (k0 < 1 || n < 0) throw ConfigError("family: need k0 >= 1 and N >= 0");
  if (k0 + n + 1 > bands.n_bands()) {
    throw ConfigError("family: band k0+N+1 = " + std::to_string(k0 + n + 1) +
                      " unavailable (computed " + std::to_string(bands.n_bands()) + ")");
  }
  const RMatrix& ev = bands.eigenvalues;
  IsolatedFamily f;
  f.k0 = k0;
  f.n = n;
  f.ground_energy = ev.col(0).minCoeff();
  f.inner_minus = ev.col(k0 - 1).minCoeff();
  f.inner_plus = ev.col(k0 + n - 1).maxCoeff();
  Eigen::Index above_node = 0;
  Eigen::Index top_node = 0;
  f.e_plus = ev.col(k0 + n).minCoeff(&above_node);
  ev.col(k0 + n - 1).maxCoeff(&top_node);
  std::ostringstream bad;
  if (f.inner_plus >= f.e_plus) {
    bad << "upper gap closed: sup lambda_" << k0 + n << " = " << f.inner_plus << " at node "
        << top_node << " >= inf lambda_" << k0 + n + 1 << " = " << f.e_plus << " at node "
        << above_node << "; ";
  }
  if (k0 > 1) {
    Eigen::Index below_node = 0;
    f.e_minus = ev.col(k0 - 2).maxCoeff(&below_node);
    if (f.e_minus >= f.inner_minus) {
      bad << "lower gap closed: sup lambda_" << k0 - 1 << " = " << f.e_minus << " at node "
          << below_node << " >= inf lambda_" << k0 << " = " << f.inner_minus;
    }
  } else {
    // No band below: mirror the upper gap under the family.
    f.e_minus = f.inner_minus - (f.e_plus - f.inner_plus);
    f.mirrored_lower_edge = true;
  }
  if (!bad.str().empty()) throw NumericalError("family not isolated: " + bad.str());
  f.d0 = f.e_plus - f.e_minus;
  return f;
}

std::vector<CVector> bloch_floquet_transform(const CVector& f, const Supercell& box,
                                             const BrillouinGrid& grid, bool zak) {
  if (f.size() != box.size() || box.m_cells() != grid.m_pts()) {
    throw ConfigError("bloch_floquet_transform: shape mismatch");
  }
  const int loc = box.local_size();
  const auto cells = box.cells();
  std::vector<CVector> out(grid.size(), CVector::Zero(loc));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const TorusPoint th = grid.node(i);
    for (const auto& g : cells) {
      const cplx ch = character(th, g);
      for (int j = 0; j < loc; ++j) out[i](j) += ch * f(box.index(g, j));
    }
    if (zak) {
      for (int j = 0; j < loc; ++j) {
        const Point2 xh{static_cast<double>(j / box.n_s()) / box.n_s(),
                        static_cast<double>(j % box.n_s()) / box.n_s()};
        out[i](j) *= std::polar(1.0, -pairing(th, xh));
      }
    }
  }
  return out;
}

CVector inverse_bloch_floquet(const std::vector<CVector>& fibers, const Supercell& box,
                              const BrillouinGrid& grid, bool zak) {
  if (fibers.size() != grid.size() || box.m_cells() != grid.m_pts()) {
    throw ConfigError("inverse_bloch_floquet: shape mismatch");
  }
  const int loc = box.local_size();
  CVector f = CVector::Zero(box.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const TorusPoint th = grid.node(i);
    CVector fib = fibers[i];
    if (fib.size() != loc) throw ConfigError("inverse_bloch_floquet: fiber size mismatch");
    if (zak) {
      for (int j = 0; j < loc; ++j) {
        const Point2 xh{static_cast<double>(j / box.n_s()) / box.n_s(),
                        static_cast<double>(j % box.n_s()) / box.n_s()};
        fib(j) *= std::polar(1.0, pairing(th, xh));
      }
    }
    for (const auto& g : box.cells()) {
      const cplx ch = std::conj(character(th, g));
      for (int j = 0; j < loc; ++j) f(box.index(g, j)) += ch * fib(j);
    }
  }
  return f * grid.weight();
}

ThreeBlocks three_block_decomposition(const PeriodicModel& model, const BandStructure& bands,
                                      const IsolatedFamily& family, std::size_t node) {
  const FiberOperator fib = assemble_fiber(model, bands.grid.node(node));
  const Eigen::Index dim = fib.matrix.rows();
  const auto row = bands.eigenvalues.row(static_cast<Eigen::Index>(node));
  const CMatrix& v = bands.eigenvectors[node];
  ThreeBlocks b;
  b.p0 = CMatrix::Zero(dim, dim);
  b.h0 = CMatrix::Zero(dim, dim);
  for (int k = 1; k < family.k0; ++k) {
    const CMatrix pk = v.col(k - 1) * v.col(k - 1).adjoint();
    b.p0 += pk;
    b.h0 += row(k - 1) * pk;
  }
  b.pb = eigenprojection(bands, node, family.k0, family.k_last());
  b.hb = CMatrix::Zero(dim, dim);
  for (int k = family.k0; k <= family.k_last(); ++k) {
    b.hb += row(k - 1) * (v.col(k - 1) * v.col(k - 1).adjoint());
  }
  b.pinf = CMatrix::Identity(dim, dim) - b.p0 - b.pb;
  b.hinf = fib.matrix - b.h0 - b.hb;
  return b;
}

}  // namespace peierls
