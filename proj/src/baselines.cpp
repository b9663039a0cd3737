#include "envmix/baselines.hpp"

#include "envmix/envelope_fit.hpp"
#include "envmix/linalg.hpp"
#include "envmix/model_core.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace envmix {

FitResult fit_ols_mixture(const Dataset& data, int M, const IccConfig& cfg) {
  return run_icc(data, M, data.r(), cfg);
}

void TwoStageConfig::validate(int r) const {
  if (svd_components < 1 || svd_components > r) throw ContractViolation("svd_components must lie in 1..r");
  if (gmm_max_iter < 1) throw ContractViolation("gmm_max_iter must be positive");
  if (!(gmm_tol > 0.0)) throw ContractViolation("gmm_tol must be positive");
}

Matrix normal_scores(const Matrix& a) {
  const boost::math::normal_distribution<double> standard;
  const auto n = a.rows();
  Matrix out(n, a.cols());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index x, Eigen::Index y) { return a(x, j) < a(y, j); });
    // Tied values share their average rank.
    for (Eigen::Index start = 0; start < n;) {
      Eigen::Index end = start + 1;
      while (end < n && a(order[static_cast<std::size_t>(end)], j) == a(order[static_cast<std::size_t>(start)], j)) ++end;
      const double rank = 0.5 * static_cast<double>(start + 1 + end);
      const double q = boost::math::quantile(standard, (rank - 0.5) / static_cast<double>(n));
      for (Eigen::Index t = start; t < end; ++t) out(order[static_cast<std::size_t>(t)], j) = q;
      start = end;
    }
  }
  return out;
}

Matrix svd_scores(const Matrix& y, int d) {
  Matrix centered = y.rowwise() - y.colwise().mean();
  Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Matrix scores = svd.matrixU().leftCols(d) * svd.singularValues().head(d).asDiagonal();
  // Fix the sign of each component so the largest loading is positive.
  for (int j = 0; j < d; ++j) {
    Eigen::Index idx = 0;
    svd.matrixV().col(j).cwiseAbs().maxCoeff(&idx);
    if (svd.matrixV()(idx, j) < 0.0) scores.col(j) = -scores.col(j);
  }
  return scores;
}

namespace {

struct GmmAttempt {
  GmmFit fit;
  bool degenerate = false;
};

GmmAttempt run_gmm(const Matrix& z, int M, const TwoStageConfig& cfg, std::uint64_t seed) {
  const int n = static_cast<int>(z.rows());
  const int d = static_cast<int>(z.cols());
  Rng rng(seed);
  GmmAttempt attempt;
  GmmFit& fit = attempt.fit;

  // k-means++ seeding for the means, pooled covariance for every component.
  std::uniform_int_distribution<int> pick(0, n - 1);
  fit.means.push_back(z.row(pick(rng)).transpose());
  Vector dist = Vector::Constant(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(fit.means.size()) < M) {
    for (int i = 0; i < n; ++i) dist[i] = std::min(dist[i], (z.row(i).transpose() - fit.means.back()).squaredNorm());
    std::discrete_distribution<int> draw(dist.data(), dist.data() + n);
    fit.means.push_back(z.row(draw(rng)).transpose());
  }
  const Matrix centered = z.rowwise() - z.colwise().mean();
  const Matrix pooled = (centered.transpose() * centered) / n;
  fit.covariances.assign(static_cast<std::size_t>(M), pooled);
  fit.weights = Vector::Constant(M, 1.0 / M);
  const double reg = 1e-6 * std::max(pooled.trace() / d, 1e-12);

  Matrix logp(n, M);
  double previous = -std::numeric_limits<double>::infinity();
  for (int iter = 1; iter <= cfg.gmm_max_iter; ++iter) {
    for (int k = 0; k < M; ++k) {
      Eigen::LLT<Matrix> llt(fit.covariances[static_cast<std::size_t>(k)]);
      if (llt.info() != Eigen::Success) {
        attempt.degenerate = true;
        return attempt;
      }
      const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
      const double c = std::log(fit.weights[k]) - 0.5 * d * std::log(2.0 * std::numbers::pi) - 0.5 * logdet;
      for (int i = 0; i < n; ++i) {
        const Vector diff = z.row(i).transpose() - fit.means[static_cast<std::size_t>(k)];
        logp(i, k) = c - 0.5 * diff.dot(llt.solve(diff));
      }
    }
    const Vector lse = log_sum_exp_rows(logp);
    fit.loglik = lse.sum();
    fit.responsibilities = (logp.colwise() - lse).array().exp();
    fit.iterations = iter;
    if (std::abs(fit.loglik - previous) <= cfg.gmm_tol * std::abs(fit.loglik)) {
      fit.converged = true;
      break;
    }
    previous = fit.loglik;

    const Vector nk = fit.responsibilities.colwise().sum();
    for (int k = 0; k < M; ++k) {
      if (nk[k] < static_cast<double>(d + 1)) {
        attempt.degenerate = true;
        return attempt;
      }
      const Vector w = fit.responsibilities.col(k);
      const Vector mean = (z.transpose() * w) / nk[k];
      const Matrix diff = z.rowwise() - mean.transpose();
      Matrix cov = (diff.transpose() * w.asDiagonal() * diff) / nk[k];
      cov = linalg::symmetrize(cov);
      cov.diagonal().array() += reg;
      fit.means[static_cast<std::size_t>(k)] = mean;
      fit.covariances[static_cast<std::size_t>(k)] = cov;
      fit.weights[k] = nk[k] / n;
    }
  }
  return attempt;
}

}  // namespace

GmmFit fit_gmm(const Matrix& z, int M, const TwoStageConfig& cfg) {
  if (M < 1) throw ContractViolation("M must be >= 1");
  if (z.rows() < M) throw ContractViolation("fewer rows than mixture components");
  for (int attempt = 0; attempt <= cfg.max_restarts; ++attempt) {
    GmmAttempt result = run_gmm(z, M, cfg, derive_seed(cfg.seed, static_cast<std::uint64_t>(attempt)));
    if (!result.degenerate) {
      result.fit.restarts = attempt;
      return std::move(result.fit);
    }
  }
  throw SingularMatrix("Gaussian mixture EM degenerated on every restart");
}

FitResult two_stage_fit(const Dataset& data, int M, int u, const TwoStageConfig& ts,
                        const IccConfig& cfg) {
  ts.validate(data.r());
  if (u < 0 || u > data.r()) throw ContractViolation("u must lie in 0..r");
  const Matrix z = normal_scores(svd_scores(data.Y, ts.svd_components));
  const GmmFit gmm = fit_gmm(z, M, ts);

  LabelVector labels = argmax_labels(gmm.responsibilities);
  repair_labels(labels, gmm.responsibilities, M, min_group_size(u, data.p(), data.r()));
  MixtureParams theta = cc_step(data, labels, M, u, cfg, 1);

  FitResult result;
  result.theta = std::move(theta);
  result.labels = std::move(labels);
  result.responsibilities = gmm.responsibilities;
  result.loglik_trace = {mixture_loglik(data, result.theta)};
  result.converged = gmm.converged;
  result.iterations = 1;
  result.best_iteration = 1;
  result.seed_used = ts.seed;
  result.restarts = gmm.restarts;
  return result;
}

Fitter ols_fitter(int M, const IccConfig& cfg) {
  return [M, cfg](const Dataset& data, std::uint64_t seed) {
    IccConfig run = cfg;
    run.seed = seed;
    return fit_ols_mixture(data, M, run);
  };
}

Fitter two_stage_fitter(int M, int u, const TwoStageConfig& ts, const IccConfig& cfg) {
  return [M, u, ts, cfg](const Dataset& data, std::uint64_t seed) {
    TwoStageConfig stage = ts;
    stage.seed = seed;
    IccConfig run = cfg;
    run.seed = seed;
    return two_stage_fit(data, M, u, stage, run);
  };
}

}  // namespace envmix
