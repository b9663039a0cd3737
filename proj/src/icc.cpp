#include "envmix/icc.hpp"

#include "envmix/model_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

namespace envmix {

void IccConfig::validate() const {
  if (max_iter < 1) throw ContractViolation("max_iter must be positive");
  if (burn_in < 0 || burn_in >= max_iter) throw ContractViolation("need 0 <= burn_in < max_iter");
  if (!(loglik_tol > 0.0)) throw ContractViolation("loglik_tol must be positive");
  if (window < 1) throw ContractViolation("window must be positive");
  if (n_starts < 1) throw ContractViolation("n_starts must be positive");
  if (n_chains < 1) throw ContractViolation("n_chains must be positive");
  if (max_restarts < 0) throw ContractViolation("max_restarts must be non-negative");
}

OptimizerConfig IccConfig::optimizer(std::uint64_t stream) const {
  OptimizerConfig opt;
  opt.max_iter = grassmann_max_iter;
  opt.grad_tol = grassmann_grad_tol;
  opt.n_starts = n_starts;
  opt.seed = derive_seed(seed, stream);
  return opt;
}

double FitResult::loglik() const {
  if (best_iteration < 1) return -std::numeric_limits<double>::infinity();
  return loglik_trace[static_cast<std::size_t>(best_iteration - 1)];
}

Matrix posterior_responsibilities(const Dataset& data, const MixtureParams& theta) {
  Matrix logw = weighted_log_densities(data, theta);
  const Vector lse = log_sum_exp_rows(logw);
  Matrix gamma(logw.rows(), logw.cols());
  for (Eigen::Index i = 0; i < logw.rows(); ++i) {
    gamma.row(i) = (logw.row(i).array() - lse[i]).exp();
    gamma.row(i) /= gamma.row(i).sum();
  }
  return gamma;
}

LabelVector impute_labels(const Matrix& gamma, Rng& rng, std::span<const int> noise_order) {
  const auto n = gamma.rows();
  const auto m = gamma.cols();
  if (!noise_order.empty() && static_cast<Eigen::Index>(noise_order.size()) != m) {
    throw ContractViolation("noise_order must have one entry per component");
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  LabelVector labels(static_cast<std::size_t>(n));
  std::vector<double> gumbel(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (auto& g : gumbel) {
      double v = unif(rng);
      while (v <= 0.0) v = unif(rng);
      g = -std::log(-std::log(v));
    }
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < m; ++k) {
      const double w = gamma(i, k);
      if (!(w > 0.0)) continue;
      const auto col = noise_order.empty() ? static_cast<std::size_t>(k)
                                           : static_cast<std::size_t>(noise_order[static_cast<std::size_t>(k)]);
      const double score = std::log(w) + gumbel[col];
      if (score > best_score) {
        best_score = score;
        best = static_cast<int>(k);
      }
    }
    labels[static_cast<std::size_t>(i)] = best + 1;
  }
  return labels;
}

bool repair_labels(LabelVector& labels, const Matrix& affinity, int M, int min_size) {
  const int n = static_cast<int>(labels.size());
  if (n < M * min_size) {
    throw EmptyGroup(M, n / std::max(M, 1), min_size);
  }
  std::vector<int> counts(static_cast<std::size_t>(M), 0);
  for (int label : labels) ++counts[static_cast<std::size_t>(label - 1)];
  bool changed = false;
  for (int k = 0; k < M; ++k) {
    auto& count = counts[static_cast<std::size_t>(k)];
    if (count >= min_size) continue;
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return affinity(a, k) > affinity(b, k); });
    for (int i : order) {
      if (count >= min_size) break;
      const int from = labels[static_cast<std::size_t>(i)] - 1;
      if (from == k || counts[static_cast<std::size_t>(from)] <= min_size) continue;
      labels[static_cast<std::size_t>(i)] = k + 1;
      --counts[static_cast<std::size_t>(from)];
      ++count;
      changed = true;
    }
    if (count < min_size) throw EmptyGroup(k + 1, count, min_size);
  }
  return changed;
}

MixtureParams cc_step(const Dataset& data, const LabelVector& labels, int M, int u,
                      const IccConfig& cfg, std::uint64_t stream,
                      std::span<const Matrix> extra_starts) {
  const GroupedMoments moments = compute_moments(data, labels, M, min_group_size(u, data.p(), data.r()));
  GroupwiseFit fit = fit_groupwise_envelope(moments, u, cfg.optimizer(stream), extra_starts);
  MixtureParams theta;
  Vector pi(M);
  for (int k = 0; k < M; ++k) {
    pi[k] = static_cast<double>(moments.sizes[static_cast<std::size_t>(k)]) / moments.n;
  }
  theta.pi = clip_proportions(pi);
  theta.groups = std::move(fit.groups);
  theta.basis = std::move(fit.basis);
  theta.Omega0 = std::move(fit.Omega0);
  return theta;
}

MixtureParams initial_params(const Dataset& data, int M, int u, const IccConfig& cfg, Rng& rng) {
  const int n = data.n();
  const Matrix& y = data.Y;
  std::vector<Vector> centroids;
  std::uniform_int_distribution<int> pick(0, n - 1);
  centroids.push_back(y.row(pick(rng)).transpose());
  Vector nearest = Vector::Constant(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(centroids.size()) < M) {
    for (int i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], (y.row(i).transpose() - centroids.back()).squaredNorm());
    }
    Eigen::Index far = 0;
    nearest.maxCoeff(&far);
    centroids.push_back(y.row(far).transpose());
  }

  LabelVector labels(static_cast<std::size_t>(n), 1);
  Matrix affinity(n, M);
  for (int pass = 0; pass <= cfg.kmeans_iter; ++pass) {
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < M; ++k) {
        affinity(i, k) = -(y.row(i).transpose() - centroids[static_cast<std::size_t>(k)]).squaredNorm();
      }
    }
    const LabelVector next = argmax_labels(affinity);
    const bool stable = pass > 0 && next == labels;
    labels = next;
    if (stable) break;
    std::vector<int> counts(static_cast<std::size_t>(M), 0);
    std::vector<Vector> sums(static_cast<std::size_t>(M), Vector::Zero(data.r()));
    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(labels[static_cast<std::size_t>(i)] - 1);
      ++counts[k];
      sums[k] += y.row(i).transpose();
    }
    for (std::size_t k = 0; k < centroids.size(); ++k) {
      if (counts[k] > 0) centroids[k] = sums[k] / counts[k];
    }
  }
  repair_labels(labels, affinity, M, min_group_size(u, data.p(), data.r()));
  MixtureParams theta = cc_step(data, labels, M, u, cfg, 1);
  theta.pi = Vector::Constant(M, 1.0 / M);
  return theta;
}

LabelVector argmax_labels(const Matrix& gamma) {
  LabelVector labels(static_cast<std::size_t>(gamma.rows()));
  for (Eigen::Index i = 0; i < gamma.rows(); ++i) {
    Eigen::Index best = 0;
    gamma.row(i).maxCoeff(&best);
    labels[static_cast<std::size_t>(i)] = static_cast<int>(best) + 1;
  }
  return labels;
}

namespace {

/// One chain of I/CC iterations. Returns nullopt when `allow_restart` is set
/// and some cluster fell below the minimum size.
std::optional<FitResult> iterate(const Dataset& data, const MixtureParams& init,
                                 const IccConfig& cfg, std::uint64_t seed,
                                 std::span<const int> noise_order, bool allow_restart) {
  const int M = init.M();
  const int u = init.u();
  const int min_size = min_group_size(u, data.p(), data.r());
  IccConfig run_cfg = cfg;
  run_cfg.seed = seed;
  Rng rng(derive_seed(seed, 0x696d70ULL));

  FitResult result;
  result.seed_used = seed;
  MixtureParams theta = init;
  MixtureParams best_theta;
  double best_ll = -std::numeric_limits<double>::infinity();
  std::vector<Matrix> warm;

  for (int t = 1; t <= cfg.max_iter; ++t) {
    const Matrix gamma = posterior_responsibilities(data, theta);
    LabelVector labels = impute_labels(gamma, rng, noise_order);
    std::vector<int> counts(static_cast<std::size_t>(M), 0);
    for (int label : labels) ++counts[static_cast<std::size_t>(label - 1)];
    const bool starved =
        std::any_of(counts.begin(), counts.end(), [&](int c) { return c < min_size; });
    if (starved) {
      if (allow_restart) return std::nullopt;
      repair_labels(labels, gamma, M, min_size);
      ++result.repairs;
    }
    warm.clear();
    if (cfg.warm_start && u > 0 && u < data.r()) warm.push_back(theta.basis.Gamma);
    theta = cc_step(data, labels, M, u, run_cfg, 0x10000ULL + static_cast<std::uint64_t>(t), warm);
    const double ll = mixture_loglik(data, theta);
    result.loglik_trace.push_back(ll);
    result.iterations = t;

    if (t > cfg.burn_in) {
      if (ll > best_ll || best_theta.groups.empty()) {
        best_ll = ll;
        best_theta = theta;
        result.best_iteration = t;
      }
      const int post = t - cfg.burn_in;
      if (post >= 2 * cfg.window) {
        const auto end = result.loglik_trace.end();
        const double recent = std::accumulate(end - cfg.window, end, 0.0) / cfg.window;
        const double previous =
            std::accumulate(end - 2 * cfg.window, end - cfg.window, 0.0) / cfg.window;
        if (std::abs(recent - previous) <= cfg.loglik_tol * std::abs(previous)) {
          result.converged = true;
          break;
        }
      }
    }
  }
  result.theta = std::move(best_theta);
  result.responsibilities = posterior_responsibilities(data, result.theta);
  result.labels = argmax_labels(result.responsibilities);
  return result;
}

void check_run_args(const Dataset& data, int M, int u, const IccConfig& cfg) {
  cfg.validate();
  if (M < 1) throw ContractViolation("M must be >= 1");
  if (u < 0 || u > data.r()) throw ContractViolation("u must lie in 0..r");
}

}  // namespace

FitResult run_icc_from(const Dataset& data, const MixtureParams& init, const IccConfig& cfg,
                       std::span<const int> noise_order) {
  init.validate();
  check_run_args(data, init.M(), init.u(), cfg);
  auto result = iterate(data, init, cfg, cfg.seed, noise_order, false);
  return std::move(*result);
}

FitResult run_icc(const Dataset& data, int M, int u, const IccConfig& cfg) {
  check_run_args(data, M, u, cfg);
  const bool restart = cfg.empty_cluster_policy == EmptyClusterPolicy::Restart;
  auto run_chain = [&](int chain) {
    const std::uint64_t chain_seed =
        chain == 0 ? cfg.seed : derive_seed(cfg.seed, 0x636861696eULL + static_cast<std::uint64_t>(chain));
    for (int attempt = 0;; ++attempt) {
      const std::uint64_t seed =
          attempt == 0 ? chain_seed
                       : derive_seed(chain_seed, 0x72657374ULL + static_cast<std::uint64_t>(attempt));
      IccConfig attempt_cfg = cfg;
      attempt_cfg.seed = seed;
      Rng init_rng(derive_seed(seed, 0x696e6974ULL));
      const MixtureParams init = initial_params(data, M, u, attempt_cfg, init_rng);
      const bool allow_restart = restart && attempt < cfg.max_restarts;
      if (auto result = iterate(data, init, attempt_cfg, seed, {}, allow_restart)) {
        result->restarts = attempt;
        result->chain = chain;
        return std::move(*result);
      }
    }
  };
  FitResult best = run_chain(0);
  for (int chain = 1; chain < cfg.n_chains; ++chain) {
    FitResult next = run_chain(chain);
    if (next.loglik() > best.loglik()) best = std::move(next);
  }
  return best;
}

}  // namespace envmix
