#pragma once

#include "envmix/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace envmix {

/// Per-group sufficient statistics for a groupwise envelope fit.
struct GroupedMoments {
  int n = 0;
  int r = 0;
  int p = 0;
  std::vector<int> sizes;
  std::vector<Vector> y_mean;
  std::vector<Vector> x_mean;
  std::vector<Matrix> xtx;        // Xc^T Xc, p x p
  std::vector<Matrix> ols_beta;   // (Yc^T Xc)(Xc^T Xc)^{-1}, r x p
  std::vector<Matrix> Sigma_res;  // (1/n_k) Yc^T Q_X Yc
  Matrix Sigma_Y;                 // (1/n) sum_k Yc^T Yc

  int M() const { return static_cast<int>(sizes.size()); }
  /// Pooled residual covariance sum_k (n_k/n) Sigma_res,k.
  Matrix pooled_residual() const;
  /// trace(Sigma_Y) / r, the reference level for ridge regularization.
  double variance_scale() const;
};

/// Smallest group admitted into a fit with u >= 1: residual degrees of
/// freedom n_k - 1 - p of at least 3r. With fewer, the smallest eigenvalue of
/// a group's residual covariance collapses toward zero (exactly zero below r),
/// the shared basis aligns with it and the likelihood rewards spurious small
/// clusters. With u = 0 no residual covariance enters the fit.
int min_group_size(int u, int p, int r);

/// Throws EmptyGroup when some group has fewer than `min_size` members.
GroupedMoments compute_moments(const Dataset& data, const LabelVector& labels, int M,
                               int min_size = 2);

struct OptimizerConfig {
  int max_iter = 500;
  double grad_tol = 1e-8;
  int n_starts = 5;
  /// Also start from u eigenvectors of Sigma_Y and of the pooled residual
  /// covariance chosen greedily by objective value.
  bool greedy_starts = true;
  std::uint64_t seed = 0;
  double armijo_c = 1e-4;
  double backtrack = 0.5;
};

/// sum_k (n_k/n) log det(G^T S_res,k G) + log det(G^T S_Y^{-1} G).
double grassmann_objective(const Matrix& Gamma, const GroupedMoments& moments);

/// Precomputed objective over a fixed set of moments; also supplies the
/// Riemannian gradient on the Grassmann manifold.
class GrassmannObjective {
 public:
  explicit GrassmannObjective(const GroupedMoments& moments);

  double value(const Matrix& Gamma) const;
  /// (I - G G^T) times the Euclidean gradient.
  Matrix riemannian_gradient(const Matrix& Gamma) const;
  /// Value and Riemannian gradient in one pass.
  double evaluate(const Matrix& Gamma, Matrix* gradient) const;

  const Matrix& sigma_y_inverse() const { return sigma_y_inv_; }

 private:
  std::vector<double> weights_;
  std::vector<Matrix> sigma_res_;
  Matrix sigma_y_inv_;
};

struct GammaFit {
  EnvelopeBasis basis;
  double objective = 0.0;
  std::vector<double> trace;  // objective per accepted iterate of the winning start
  bool converged = false;     // false: max_iter hit, best iterate returned
  int winning_start = 0;
};

/// Gradient descent with QR retraction and Armijo backtracking from a single
/// starting point.
GammaFit optimize_gamma_from(const GrassmannObjective& objective, const Matrix& start,
                             const OptimizerConfig& cfg);

/// Multi-start minimization for 1 <= u <= r-1. Starts, in order: each of
/// `extra_starts`, top-u eigenvectors of Sigma_Y, of the pooled residual
/// covariance, then random orthonormal matrices up to cfg.n_starts total
/// non-extra starts, then (if cfg.greedy_starts) the two greedy eigenvector
/// starts. Ties go to the lower start index.
GammaFit fit_gamma(const GroupedMoments& moments, int u, const OptimizerConfig& cfg,
                   std::span<const Matrix> extra_starts = {});

struct GroupwiseFit {
  EnvelopeBasis basis;
  std::vector<GroupParams> groups;
  Matrix Omega0;
  std::vector<Matrix> beta;
  double objective_value = 0.0;
  std::vector<double> optimizer_trace;
  bool optimizer_converged = true;
};

/// Closed-form coordinates given the basis: mu_k = group mean of Y,
/// eta_k = Gamma^T * OLS_k, Omega_k = Gamma^T S_res,k Gamma,
/// Omega0 = Gamma0^T S_Y Gamma0.
GroupwiseFit coordinate_estimates(const EnvelopeBasis& basis, const GroupedMoments& moments);

/// compute_moments -> fit_gamma -> coordinate_estimates, with u = 0 and u = r
/// handled in closed form.
GroupwiseFit fit_groupwise_envelope(const Dataset& data, const LabelVector& labels, int M, int u,
                                    const OptimizerConfig& cfg,
                                    std::span<const Matrix> extra_starts = {});

GroupwiseFit fit_groupwise_envelope(const GroupedMoments& moments, int u,
                                    const OptimizerConfig& cfg,
                                    std::span<const Matrix> extra_starts = {});

}  // namespace envmix
