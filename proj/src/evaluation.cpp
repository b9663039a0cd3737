#include "envmix/evaluation.hpp"

#include "envmix/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

namespace envmix {

Eigen::MatrixXi confusion_matrix(const LabelVector& est, const LabelVector& truth, int M) {
  if (est.size() != truth.size()) throw ContractViolation("label vectors differ in length");
  validate_labels(est, static_cast<int>(est.size()), M);
  validate_labels(truth, static_cast<int>(truth.size()), M);
  Eigen::MatrixXi c = Eigen::MatrixXi::Zero(M, M);
  for (std::size_t i = 0; i < est.size(); ++i) ++c(est[i] - 1, truth[i] - 1);
  return c;
}

std::vector<int> hungarian_assignment(const Matrix& cost) {
  // Shortest augmenting path formulation with row/column potentials.
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw ContractViolation("assignment cost matrix must be square");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> row_pot(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<double> col_pot(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<int> match(static_cast<std::size_t>(n + 1), 0);  // column -> row, 1-based
  std::vector<int> way(static_cast<std::size_t>(n + 1), 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
    std::vector<bool> used(static_cast<std::size_t>(n + 1), false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const int i0 = match[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - row_pot[static_cast<std::size_t>(i0)] -
                           col_pot[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          row_pot[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
          col_pot[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> result(static_cast<std::size_t>(n), 0);
  for (int j = 1; j <= n; ++j) result[static_cast<std::size_t>(match[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return result;
}

Permutation match_labels(const LabelVector& est, const LabelVector& truth, int M) {
  const Eigen::MatrixXi c = confusion_matrix(est, truth, M);
  Permutation perm(static_cast<std::size_t>(M));
  if (M <= 6) {
    std::vector<int> candidate(static_cast<std::size_t>(M));
    std::iota(candidate.begin(), candidate.end(), 1);
    long best = -1;
    do {
      long agree = 0;
      for (int e = 0; e < M; ++e) agree += c(e, candidate[static_cast<std::size_t>(e)] - 1);
      if (agree > best) {
        best = agree;
        perm = candidate;
      }
    } while (std::next_permutation(candidate.begin(), candidate.end()));
    return perm;
  }
  const Matrix cost = -c.cast<double>();
  const auto assignment = hungarian_assignment(cost);
  for (int e = 0; e < M; ++e) perm[static_cast<std::size_t>(e)] = assignment[static_cast<std::size_t>(e)] + 1;
  return perm;
}

LabelVector apply_permutation(const LabelVector& labels, const Permutation& perm) {
  LabelVector out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out[i] = perm[static_cast<std::size_t>(labels[i] - 1)];
  }
  return out;
}

namespace {

/// Rates for labels already expressed in the truth's label space.
ClusterScore matched_rates(const LabelVector& matched, const LabelVector& truth, int M) {
  ClusterScore score;
  const Eigen::MatrixXi c = confusion_matrix(matched, truth, M);
  for (int k = 0; k < M; ++k) {
    const int est_size = c.row(k).sum();
    const int true_size = c.col(k).sum();
    const int both = c(k, k);
    if (est_size == 0) {
      score.fsr += 1.0;
      ++score.empty_estimated;
    } else {
      score.fsr += static_cast<double>(est_size - both) / est_size;
    }
    if (true_size == 0) {
      throw ContractViolation("true cluster " + std::to_string(k + 1) + " is empty");
    }
    score.nsr += static_cast<double>(true_size - both) / true_size;
  }
  score.fsr /= M;
  score.nsr /= M;
  return score;
}

}  // namespace

ClusterScore fsr_nsr(const LabelVector& est, const LabelVector& truth, int M) {
  if (M > 6) {
    const Permutation perm = match_labels(est, truth, M);
    ClusterScore score = matched_rates(apply_permutation(est, perm), truth, M);
    score.permutation = perm;
    return score;
  }
  // Among the permutations with maximal agreement, take the lowest
  // (fsr, nsr); the score then depends only on the partitions, not on how
  // the estimated clusters happen to be numbered.
  const Eigen::MatrixXi c = confusion_matrix(est, truth, M);
  Permutation candidate(static_cast<std::size_t>(M));
  std::iota(candidate.begin(), candidate.end(), 1);
  long best_agree = -1;
  ClusterScore best;
  do {
    long agree = 0;
    for (int e = 0; e < M; ++e) agree += c(e, candidate[static_cast<std::size_t>(e)] - 1);
    if (agree < best_agree) continue;
    ClusterScore score = matched_rates(apply_permutation(est, candidate), truth, M);
    if (agree > best_agree || score.fsr < best.fsr || (score.fsr == best.fsr && score.nsr < best.nsr)) {
      best_agree = agree;
      best = std::move(score);
      best.permutation = candidate;
    }
  } while (std::next_permutation(candidate.begin(), candidate.end()));
  return best;
}

// ---------------------------------------------------------------------------
// Prediction

Matrix predict(const MixtureParams& theta, const Dataset& data, PredictionRule rule) {
  theta.validate();
  if (data.p() != theta.p() || data.r() != theta.r()) {
    throw ContractViolation("dataset dimensions do not match parameters");
  }
  const int n = data.n();
  const int M = theta.M();
  Matrix out(n, data.r());
  Eigen::Index max_pi = 0;
  theta.pi.maxCoeff(&max_pi);
  LabelVector assigned;
  if (rule == PredictionRule::Posterior) assigned = argmax_labels(posterior_responsibilities(data, theta));
  for (int i = 0; i < n; ++i) {
    const Vector x = data.X.row(i).transpose();
    Vector yhat;
    switch (rule) {
      case PredictionRule::PriorMean:
        yhat = Vector::Zero(data.r());
        for (int k = 0; k < M; ++k) {
          yhat += theta.pi[k] * theta.groups[static_cast<std::size_t>(k)].mean(theta.basis, x);
        }
        break;
      case PredictionRule::MaxPi:
        yhat = theta.groups[static_cast<std::size_t>(max_pi)].mean(theta.basis, x);
        break;
      case PredictionRule::Posterior:
        yhat = theta.groups[static_cast<std::size_t>(assigned[static_cast<std::size_t>(i)] - 1)].mean(
            theta.basis, x);
        break;
    }
    out.row(i) = yhat.transpose();
  }
  return out;
}

double prediction_error(const MixtureParams& theta, const Dataset& data, PredictionRule rule,
                        ErrorMetric metric) {
  const Matrix resid = data.Y - predict(theta, data, rule);
  const Vector sq = resid.rowwise().squaredNorm();
  if (metric == ErrorMetric::SquaredNorm) return sq.mean();
  return sq.array().sqrt().mean();
}

Fitter icc_fitter(int M, int u, const IccConfig& cfg) {
  return [M, u, cfg](const Dataset& data, std::uint64_t seed) {
    IccConfig c = cfg;
    c.seed = seed;
    return run_icc(data, M, u, c);
  };
}

std::vector<std::vector<int>> cv_splits(int n, int folds, int repeats, std::uint64_t seed) {
  if (folds < 2) throw ContractViolation("need at least 2 folds");
  if (folds > n) throw ContractViolation("more folds than observations");
  std::vector<std::vector<int>> splits;
  for (int rep = 0; rep < repeats; ++rep) {
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, 0x73706c74ULL + static_cast<std::uint64_t>(rep)));
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> fold_of(static_cast<std::size_t>(n));
    for (int pos = 0; pos < n; ++pos) fold_of[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])] = pos % folds;
    splits.push_back(std::move(fold_of));
  }
  return splits;
}

std::uint64_t fold_seed(std::uint64_t seed, int repeat, int fold) {
  return derive_seed(derive_seed(seed, 0x666f6c64ULL + static_cast<std::uint64_t>(repeat)),
                     static_cast<std::uint64_t>(fold));
}

double holdout_error(const Dataset& train, const Dataset& test, const Fitter& fit,
                     std::uint64_t seed, PredictionRule rule, ErrorMetric metric) {
  const FitResult result = fit(train, seed);
  return prediction_error(result.theta, test, rule, metric);
}

namespace {

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

PredictionReport cv_prediction_error(const Dataset& data, const Fitter& fit, const CvOptions& options) {
  if (options.repeats < 1) throw ContractViolation("need at least one repeat");
  const auto splits = cv_splits(data.n(), options.folds, options.repeats, options.seed);
  const int tasks = options.repeats * options.folds;
  std::vector<std::optional<double>> errors(static_cast<std::size_t>(tasks));
  parallel_for(tasks, [&](int task) {
    const int rep = task / options.folds;
    const int fold = task % options.folds;
    const auto& fold_of = splits[static_cast<std::size_t>(rep)];
    std::vector<int> train_rows;
    std::vector<int> test_rows;
    for (int i = 0; i < data.n(); ++i) {
      (fold_of[static_cast<std::size_t>(i)] == fold ? test_rows : train_rows).push_back(i);
    }
    try {
      errors[static_cast<std::size_t>(task)] =
          holdout_error(data.subset(train_rows), data.subset(test_rows), fit,
                        fold_seed(options.seed, rep, fold), options.rule, options.metric);
    } catch (const Error&) {
      errors[static_cast<std::size_t>(task)] = std::nullopt;
    }
  });

  PredictionReport report;
  report.folds = options.folds;
  report.repeats = options.repeats;
  for (int rep = 0; rep < options.repeats; ++rep) {
    double sum = 0.0;
    int count = 0;
    for (int fold = 0; fold < options.folds; ++fold) {
      const auto& e = errors[static_cast<std::size_t>(rep * options.folds + fold)];
      if (!e) {
        ++report.failed_folds;
        continue;
      }
      report.per_fold.push_back(*e);
      sum += *e;
      ++count;
    }
    if (count > 0) report.per_repeat.push_back(sum / count);
  }
  if (report.per_fold.empty()) throw Error("every cross-validation fold failed");
  report.mean_error = std::accumulate(report.per_fold.begin(), report.per_fold.end(), 0.0) /
                      static_cast<double>(report.per_fold.size());
  report.sd_error = options.repeats > 1 ? sample_sd(report.per_repeat) : sample_sd(report.per_fold);
  return report;
}

PredictionReport cv_prediction_error(const Dataset& data, int M, int u, const CvOptions& options,
                                     const IccConfig& cfg) {
  return cv_prediction_error(data, icc_fitter(M, u, cfg), options);
}

// ---------------------------------------------------------------------------
// Bootstrap

BootstrapReport bootstrap_se(const Dataset& data, const Fitter& fit, int B, std::uint64_t seed) {
  if (B < 2) throw ContractViolation("bootstrap needs B >= 2");
  const FitResult reference = fit(data, seed);
  const int M = reference.theta.M();
  const int n = data.n();

  std::vector<std::optional<std::vector<Matrix>>> betas(static_cast<std::size_t>(B));
  parallel_for(B, [&](int b) {
    Rng rng(derive_seed(seed, 0x626f6f74ULL + static_cast<std::uint64_t>(b)));
    std::uniform_int_distribution<int> pick(0, n - 1);
    std::vector<int> rows(static_cast<std::size_t>(n));
    for (auto& row : rows) row = pick(rng);
    try {
      const FitResult replicate = fit(data.subset(rows), derive_seed(seed, static_cast<std::uint64_t>(b) + 1));
      if (replicate.theta.M() != M) return;
      LabelVector ref_labels(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        ref_labels[i] = reference.labels[static_cast<std::size_t>(rows[i])];
      }
      const Permutation perm = match_labels(replicate.labels, ref_labels, M);
      std::vector<Matrix> aligned(static_cast<std::size_t>(M));
      for (int e = 0; e < M; ++e) {
        aligned[static_cast<std::size_t>(perm[static_cast<std::size_t>(e)] - 1)] =
            replicate.theta.groups[static_cast<std::size_t>(e)].beta(replicate.theta.basis);
      }
      betas[static_cast<std::size_t>(b)] = std::move(aligned);
    } catch (const Error&) {
      // counted as failed below
    }
  });

  BootstrapReport report;
  report.B = B;
  const int r = data.r();
  const int p = data.p();
  std::vector<Matrix> sum(static_cast<std::size_t>(M), Matrix::Zero(r, p));
  std::vector<Matrix> sum_sq(static_cast<std::size_t>(M), Matrix::Zero(r, p));
  int ok = 0;
  for (const auto& rep : betas) {
    if (!rep) {
      ++report.failed;
      continue;
    }
    ++ok;
    for (int k = 0; k < M; ++k) {
      sum[static_cast<std::size_t>(k)] += (*rep)[static_cast<std::size_t>(k)];
    }
  }
  if (ok < 2) throw Error("fewer than two bootstrap replicates succeeded");
  for (const auto& rep : betas) {
    if (!rep) continue;
    for (int k = 0; k < M; ++k) {
      const Matrix d = (*rep)[static_cast<std::size_t>(k)] - sum[static_cast<std::size_t>(k)] / ok;
      sum_sq[static_cast<std::size_t>(k)] += d.cwiseProduct(d);
    }
  }
  report.group_mean_sd.resize(M);
  for (int k = 0; k < M; ++k) {
    report.per_element_sd.push_back((sum_sq[static_cast<std::size_t>(k)] / (ok - 1)).cwiseSqrt());
    report.group_mean_sd[k] = report.per_element_sd.back().mean();
  }
  return report;
}

BootstrapReport bootstrap_se(const Dataset& data, int M, int u, int B, const IccConfig& cfg) {
  return bootstrap_se(data, icc_fitter(M, u, cfg), B, cfg.seed);
}

}  // namespace envmix
