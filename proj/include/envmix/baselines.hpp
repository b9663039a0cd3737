#pragma once

#include "envmix/evaluation.hpp"
#include "envmix/icc.hpp"
#include "envmix/types.hpp"

#include <cstdint>

namespace envmix {

/// The "standard model": ICC with u = r, so every CC-step is per-group OLS.
FitResult fit_ols_mixture(const Dataset& data, int M, const IccConfig& cfg);

struct TwoStageConfig {
  int svd_components = 1;
  int gmm_max_iter = 500;
  double gmm_tol = 1e-8;
  int max_restarts = 10;
  std::uint64_t seed = 0;

  void validate(int r) const;
};

/// Rank-based normal scores Phi^{-1}((rank - 0.5) / n), column by column.
Matrix normal_scores(const Matrix& a);

/// Leading `d` principal scores of the column-centered matrix (U_d S_d).
Matrix svd_scores(const Matrix& y, int d);

struct GmmFit {
  Vector weights;
  std::vector<Vector> means;
  std::vector<Matrix> covariances;
  Matrix responsibilities;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  int restarts = 0;
};

/// Full-covariance Gaussian mixture EM with k-means++ seeding. A collapsed
/// component or singular covariance restarts from a new seed.
GmmFit fit_gmm(const Matrix& z, int M, const TwoStageConfig& cfg);

/// Stage 1 clusters on Y alone (SVD scores, normal-scores transform, GMM);
/// stage 2 fits the groupwise envelope at dimension u with those labels held
/// fixed.
FitResult two_stage_fit(const Dataset& data, int M, int u, const TwoStageConfig& ts,
                        const IccConfig& cfg);

/// Fitters for the cross-validation and bootstrap harnesses. The seed replaces
/// cfg.seed (and ts.seed for the two-stage method).
Fitter ols_fitter(int M, const IccConfig& cfg);
Fitter two_stage_fitter(int M, int u, const TwoStageConfig& ts, const IccConfig& cfg);

}  // namespace envmix
