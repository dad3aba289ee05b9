#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "peierls/common.hpp"

namespace peierls {

struct EigenSystem {
  RVector values;   // ascending
  CMatrix vectors;  // columns
};

// Dense Hermitian eigensolver (LAPACK zheevd). Only the lower triangle is read.
EigenSystem hermitian_eigen(const CMatrix& a);
RVector hermitian_eigenvalues(const CMatrix& a);

// Largest singular value.
double spectral_norm(const CMatrix& a);

// max |a - a^*| entrywise.
double hermiticity_defect(const CMatrix& a);

// V f(diag) V^*
CMatrix apply_function(const EigenSystem& es, const std::function<cplx(double)>& f);

// y = A x for a Hermitian operator given only through its action.
using LinearOp = std::function<void(const CVector& in, CVector& out)>;

struct LanczosResult {
  RVector ritz_values;
  RVector residuals;  // |beta_m * last component of the Ritz vector|
};

// Lanczos with full reorthogonalization from a seeded random start vector.
LanczosResult lanczos(const LinearOp& op, Eigen::Index dim, int steps, std::uint64_t seed);

// Norm of a Hermitian operator: largest |Ritz value| after `steps` iterations.
double hermitian_operator_norm(const LinearOp& op, Eigen::Index dim, int steps = 80,
                               std::uint64_t seed = 7);

// exp(-i t H) v by a Chebyshev expansion on [e_min, e_max] (must enclose the spectrum).
CVector chebyshev_propagate(const LinearOp& h, const CVector& v, double t, double e_min,
                            double e_max, double tol = 1e-13);

SparseC to_sparse(const CMatrix& a, double drop = 0.0);

}  // namespace peierls
