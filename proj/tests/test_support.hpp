#pragma once

#include "envmix/linalg.hpp"
#include "envmix/rng.hpp"
#include "envmix/types.hpp"

#include <random>

namespace envmix::testing {

inline Matrix random_normal(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = z(rng);
  return m;
}

/// A A^T / k + shift I: symmetric, comfortably positive definite.
inline Matrix random_spd(int k, Rng& rng, double shift = 0.5) {
  if (k == 0) return Matrix(0, 0);
  const Matrix a = random_normal(k, k, rng);
  return a * a.transpose() / k + shift * Matrix::Identity(k, k);
}

inline MixtureParams random_params(int M, int r, int u, int p, Rng& rng) {
  MixtureParams theta;
  std::uniform_real_distribution<double> unif(0.2, 1.0);
  theta.pi.resize(M);
  for (int k = 0; k < M; ++k) theta.pi[k] = unif(rng);
  theta.pi /= theta.pi.sum();
  theta.basis = EnvelopeBasis::from_gamma(linalg::random_orthonormal(r, u, rng));
  if (u == 0) theta.basis = EnvelopeBasis::axis_aligned(r, 0);
  theta.Omega0 = random_spd(r - u, rng);
  for (int k = 0; k < M; ++k) {
    GroupParams g;
    g.mu = random_normal(r, 1, rng);
    g.eta = random_normal(u, p, rng);
    g.Omega = random_spd(u, rng);
    g.x_center = random_normal(p, 1, rng);
    theta.groups.push_back(std::move(g));
  }
  return theta;
}

/// Draws a dataset from `theta` with x ~ N(0, I); labels recorded.
inline Dataset sample_dataset(const MixtureParams& theta, int n, Rng& rng) {
  const int r = theta.r();
  const int p = theta.p();
  Matrix x = random_normal(n, p, rng);
  Matrix y(n, r);
  LabelVector labels(static_cast<std::size_t>(n));
  std::discrete_distribution<int> pick(theta.pi.data(), theta.pi.data() + theta.M());
  std::vector<Matrix> chol;
  for (const auto& g : theta.groups) {
    const Matrix sigma = theta.basis.Gamma * g.Omega * theta.basis.Gamma.transpose() +
                         theta.basis.Gamma0 * theta.Omega0 * theta.basis.Gamma0.transpose();
    chol.push_back(Eigen::LLT<Matrix>(sigma).matrixL());
  }
  for (int i = 0; i < n; ++i) {
    const int k = pick(rng);
    labels[static_cast<std::size_t>(i)] = k + 1;
    const auto& g = theta.groups[static_cast<std::size_t>(k)];
    const Vector mean = g.mean(theta.basis, x.row(i).transpose());
    y.row(i) = (mean + chol[static_cast<std::size_t>(k)] * random_normal(r, 1, rng)).transpose();
  }
  return Dataset(std::move(x), std::move(y), std::move(labels));
}

}  // namespace envmix::testing
