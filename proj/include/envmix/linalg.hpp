#pragma once

#include "envmix/types.hpp"
#include "envmix/rng.hpp"

namespace envmix::linalg {

Matrix symmetrize(const Matrix& a);

/// Ridge used when a factorization fails: 1e-8 * trace / dim, with a floor so
/// an all-zero matrix still becomes PD.
double ridge_lambda(const Matrix& a);

/// Cholesky of a symmetric PD matrix. A failed factorization is retried once
/// with ridge_lambda added to the diagonal; a second failure throws
/// SingularMatrix.
Eigen::LLT<Matrix> robust_llt(const Matrix& a, const char* what = "matrix");

/// log det of a symmetric PD matrix, via robust_llt. Empty matrix gives 0.
double logdet_spd(const Matrix& a, const char* what = "matrix");

/// log det without any ridge fallback; throws SingularMatrix if not PD.
double logdet_spd_strict(const Matrix& a, const char* what = "matrix");

/// A^{-1} B for symmetric PD A.
Matrix solve_spd(const Matrix& a, const Matrix& b, const char* what = "matrix");

Matrix inverse_spd(const Matrix& a, const char* what = "matrix");

/// Thin Q factor of a (rows >= cols) with a positive diagonal in R.
Matrix orthonormalize(const Matrix& a);

/// Orthonormal basis of the orthogonal complement of span(gamma); gamma must
/// have orthonormal columns.
Matrix orthonormal_complement(const Matrix& gamma);

Matrix random_orthonormal(int rows, int cols, Rng& rng);

/// Eigenvectors of a symmetric matrix for its `count` largest eigenvalues.
Matrix top_eigenvectors(const Matrix& a, int count);

/// Frobenius distance between projections onto span(a) and span(b).
double subspace_distance(const Matrix& a, const Matrix& b);

}  // namespace envmix::linalg
