#include "envmix/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace envmix::linalg {

Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

double ridge_lambda(const Matrix& a) {
  if (a.rows() == 0) return 0.0;
  const double scale = std::abs(a.trace()) / static_cast<double>(a.rows());
  return 1e-8 * std::max(scale, 1e-8);
}

Eigen::LLT<Matrix> robust_llt(const Matrix& a, const char* what) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() == Eigen::Success && (llt.matrixLLT().diagonal().array() > 0.0).all()) {
    return llt;
  }
  Matrix ridged = a;
  ridged.diagonal().array() += ridge_lambda(a);
  llt.compute(ridged);
  if (llt.info() != Eigen::Success || !(llt.matrixLLT().diagonal().array() > 0.0).all()) {
    throw SingularMatrix(std::string(what) + " is not positive definite after ridge regularization");
  }
  return llt;
}

double logdet_spd(const Matrix& a, const char* what) {
  if (a.rows() == 0) return 0.0;
  const auto llt = robust_llt(a, what);
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

double logdet_spd_strict(const Matrix& a, const char* what) {
  if (a.rows() == 0) return 0.0;
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success || !(llt.matrixLLT().diagonal().array() > 0.0).all()) {
    throw SingularMatrix(std::string(what) + " is not positive definite");
  }
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Matrix solve_spd(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() == 0) return Matrix(0, b.cols());
  return robust_llt(a, what).solve(b);
}

Matrix inverse_spd(const Matrix& a, const char* what) {
  return solve_spd(a, Matrix::Identity(a.rows(), a.cols()), what);
}

Matrix orthonormalize(const Matrix& a) {
  if (a.cols() == 0) return Matrix(a.rows(), 0);
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
  const Matrix r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

Matrix orthonormal_complement(const Matrix& gamma) {
  const Eigen::Index r = gamma.rows();
  const Eigen::Index u = gamma.cols();
  if (u == 0) return Matrix::Identity(r, r);
  if (u == r) return Matrix(r, 0);
  // Eigenvectors of I - Gamma Gamma^T with unit eigenvalue span the complement.
  const Matrix q = Matrix::Identity(r, r) - gamma * gamma.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(q);
  Matrix comp = eig.eigenvectors().rightCols(r - u);
  return orthonormalize(comp - gamma * (gamma.transpose() * comp));
}

Matrix random_orthonormal(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) g(i, j) = normal(rng);
  }
  return orthonormalize(g);
}

Matrix top_eigenvectors(const Matrix& a, int count) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(a));
  // Eigen sorts ascending.
  return eig.eigenvectors().rightCols(count).rowwise().reverse();
}

double subspace_distance(const Matrix& a, const Matrix& b) {
  const Matrix pa = a * a.transpose();
  const Matrix pb = b * b.transpose();
  return (pa - pb).norm();
}

}  // namespace envmix::linalg
