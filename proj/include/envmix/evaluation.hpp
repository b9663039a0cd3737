#pragma once

#include "envmix/icc.hpp"
#include "envmix/types.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace envmix {

// ---------------------------------------------------------------------------
// Classification

/// perm[e - 1] is the true label matched to estimated label e.
using Permutation = std::vector<int>;

/// M x M counts: confusion(e - 1, t - 1) = #{i : est_i = e, truth_i = t}.
Eigen::MatrixXi confusion_matrix(const LabelVector& est, const LabelVector& truth, int M);

/// Relabeling of `est` that maximizes agreement with `truth`. Exhaustive
/// search for M <= 6, Hungarian assignment above.
Permutation match_labels(const LabelVector& est, const LabelVector& truth, int M);

/// Minimum-cost assignment for a square cost matrix; result[row] = column.
std::vector<int> hungarian_assignment(const Matrix& cost);

LabelVector apply_permutation(const LabelVector& labels, const Permutation& perm);

struct ClusterScore {
  double fsr = 0.0;
  double nsr = 0.0;
  Permutation permutation;
  int empty_estimated = 0;  // matched estimated clusters with no members; each counts as 1 in fsr
};

/// False and negative selection rates after matching:
/// fsr = mean_k |est_k \ true_k| / |est_k|, nsr = mean_k |true_k \ est_k| / |true_k|.
/// For M <= 6, ties in agreement go to the lowest (fsr, nsr), which makes the
/// score invariant to renumbering `est`.
ClusterScore fsr_nsr(const LabelVector& est, const LabelVector& truth, int M);

// ---------------------------------------------------------------------------
// Prediction

enum class PredictionRule {
  PriorMean,  // sum_k pi_k (mu_k + beta_k (x - c_k)); uses x only
  MaxPi,      // component with the largest pi_k
  Posterior,  // component with the largest responsibility given (x, y)
};

enum class ErrorMetric {
  Norm,         // ||y - yhat||
  SquaredNorm,  // ||y - yhat||^2
};

/// n x r predicted responses for the rows of `data`. Only the Posterior rule
/// reads data.Y.
Matrix predict(const MixtureParams& theta, const Dataset& data, PredictionRule rule);

/// Mean per-observation error over the rows of `data`.
double prediction_error(const MixtureParams& theta, const Dataset& data, PredictionRule rule,
                        ErrorMetric metric);

/// Fits one model to a dataset with the given seed.
using Fitter = std::function<FitResult(const Dataset&, std::uint64_t seed)>;

Fitter icc_fitter(int M, int u, const IccConfig& cfg);

struct CvOptions {
  int folds = 5;
  int repeats = 1;
  std::uint64_t seed = 0;
  PredictionRule rule = PredictionRule::Posterior;
  ErrorMetric metric = ErrorMetric::Norm;
};

struct PredictionReport {
  double mean_error = 0.0;
  double sd_error = 0.0;  // across repeat averages, or across folds when repeats == 1
  int folds = 0;
  int repeats = 0;
  std::vector<double> per_fold;  // repeat-major; only successful folds
  std::vector<double> per_repeat;
  int failed_folds = 0;
};

/// fold_of[i] in 0..folds-1 for each repeat: a shuffled round-robin split.
std::vector<std::vector<int>> cv_splits(int n, int folds, int repeats, std::uint64_t seed);

std::uint64_t fold_seed(std::uint64_t seed, int repeat, int fold);

/// Fit on `train`, score on `test`.
double holdout_error(const Dataset& train, const Dataset& test, const Fitter& fit,
                     std::uint64_t seed, PredictionRule rule, ErrorMetric metric);

PredictionReport cv_prediction_error(const Dataset& data, const Fitter& fit, const CvOptions& options);

PredictionReport cv_prediction_error(const Dataset& data, int M, int u, const CvOptions& options,
                                     const IccConfig& cfg);

// ---------------------------------------------------------------------------
// Bootstrap

struct BootstrapReport {
  std::vector<Matrix> per_element_sd;  // M matrices r x p
  int B = 0;
  int failed = 0;
  Vector group_mean_sd;  // mean of per_element_sd[k] entries
};

/// Sample SD of every coefficient over B nonparametric resamples. Each
/// replicate's components are matched to the full-data fit through its hard
/// labels before the SDs are taken.
BootstrapReport bootstrap_se(const Dataset& data, const Fitter& fit, int B, std::uint64_t seed);

BootstrapReport bootstrap_se(const Dataset& data, int M, int u, int B, const IccConfig& cfg);

}  // namespace envmix
