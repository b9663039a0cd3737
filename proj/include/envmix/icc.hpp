#pragma once

#include "envmix/envelope_fit.hpp"
#include "envmix/rng.hpp"
#include "envmix/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace envmix {

enum class EmptyClusterPolicy { Reassign, Restart };

struct IccConfig {
  int max_iter = 200;
  int burn_in = 50;
  double loglik_tol = 1e-4;  // relative change of the windowed mean
  int window = 10;
  int n_starts = 5;  // Grassmann starts per CC-step
  std::uint64_t seed = 0;
  EmptyClusterPolicy empty_cluster_policy = EmptyClusterPolicy::Reassign;
  int max_restarts = 10;
  /// Independent chains from different initializations; the one reaching the
  /// highest log-likelihood is reported.
  int n_chains = 3;
  int kmeans_iter = 10;
  int grassmann_max_iter = 500;
  double grassmann_grad_tol = 1e-8;
  /// Offer the previous iterate's Gamma as an additional optimizer start.
  bool warm_start = true;

  void validate() const;
  OptimizerConfig optimizer(std::uint64_t stream) const;
};

struct FitResult {
  MixtureParams theta;
  LabelVector labels;       // arg max of responsibilities at theta
  Matrix responsibilities;  // n x M
  std::vector<double> loglik_trace;
  bool converged = false;
  int iterations = 0;
  std::uint64_t seed_used = 0;
  int best_iteration = 0;  // 1-based index into loglik_trace
  int restarts = 0;
  int chain = 0;    // index of the winning chain
  int repairs = 0;  // number of iterations in which the empty-cluster policy fired

  double loglik() const;
};

/// gamma_ik = pi_k f_k / sum_l pi_l f_l, computed in log space.
Matrix posterior_responsibilities(const Dataset& data, const MixtureParams& theta);

/// Independent Categorical(gamma_i.) draws via the Gumbel-max trick. When
/// `noise_order` is given, component k consumes the noise column
/// noise_order[k]; this lets two runs that differ only by a relabeling of
/// components share their random numbers.
LabelVector impute_labels(const Matrix& gamma, Rng& rng, std::span<const int> noise_order = {});

/// Moves the highest-affinity observations into every cluster that has fewer
/// than `min_size` members, never draining a donor below `min_size`. Returns
/// true when anything moved; throws EmptyGroup if n < M * min_size.
bool repair_labels(LabelVector& labels, const Matrix& affinity, int M, int min_size);

/// pi_k = n_k / n (floored at kPiFloor), everything else from the groupwise
/// envelope fit on the pseudo-complete data.
MixtureParams cc_step(const Dataset& data, const LabelVector& labels, int M, int u,
                      const IccConfig& cfg, std::uint64_t stream = 0,
                      std::span<const Matrix> extra_starts = {});

/// k-means-style start: furthest-point centroids on the rows of Y, a few
/// Lloyd passes, one CC-step, uniform pi.
MixtureParams initial_params(const Dataset& data, int M, int u, const IccConfig& cfg, Rng& rng);

/// Stochastic ICC iterations from a fixed starting point.
FitResult run_icc_from(const Dataset& data, const MixtureParams& init, const IccConfig& cfg,
                       std::span<const int> noise_order = {});

/// Runs cfg.n_chains chains (chain 0 seeded with cfg.seed itself) and keeps
/// the highest log-likelihood; ties go to the lower chain.
FitResult run_icc(const Dataset& data, int M, int u, const IccConfig& cfg);

/// Hard labels: arg max over each row (1-based).
LabelVector argmax_labels(const Matrix& gamma);

}  // namespace envmix
