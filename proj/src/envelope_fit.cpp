#include "envmix/envelope_fit.hpp"

#include "envmix/linalg.hpp"
#include "envmix/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace envmix {

namespace {

bool is_pd(const Matrix& a) {
  if (a.rows() == 0) return true;
  Eigen::LLT<Matrix> llt(a);
  return llt.info() == Eigen::Success && (llt.matrixLLT().diagonal().array() > 0.0).all();
}

/// Symmetric part of `a`, ridged when not PD. `scale` is a per-coordinate
/// variance level of the data so near-zero blocks still get a usable ridge.
Matrix make_pd(const Matrix& a, double scale) {
  Matrix sym = linalg::symmetrize(a);
  if (is_pd(sym)) return sym;
  const double level = std::max(sym.rows() > 0 ? sym.trace() / static_cast<double>(sym.rows()) : 0.0, scale);
  sym.diagonal().array() += 1e-8 * std::max(level, 1e-12);
  if (!is_pd(sym)) throw SingularMatrix("covariance block is not positive definite after ridge");
  return sym;
}

}  // namespace

Matrix GroupedMoments::pooled_residual() const {
  Matrix pooled = Matrix::Zero(r, r);
  for (int k = 0; k < M(); ++k) {
    pooled += (static_cast<double>(sizes[static_cast<std::size_t>(k)]) / n) *
              Sigma_res[static_cast<std::size_t>(k)];
  }
  return pooled;
}

double GroupedMoments::variance_scale() const {
  return r > 0 ? Sigma_Y.trace() / r : 0.0;
}

int min_group_size(int u, int p, int r) {
  if (u == 0) return 2;
  return p + 3 * r + 1;
}

GroupedMoments compute_moments(const Dataset& data, const LabelVector& labels, int M,
                               int min_size) {
  if (M < 1) throw ContractViolation("M must be >= 1");
  validate_labels(labels, data.n(), M);
  GroupedMoments mom;
  mom.n = data.n();
  mom.r = data.r();
  mom.p = data.p();
  std::vector<std::vector<int>> members(static_cast<std::size_t>(M));
  for (int i = 0; i < data.n(); ++i) {
    members[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)] - 1)].push_back(i);
  }
  for (int k = 0; k < M; ++k) {
    const int size = static_cast<int>(members[static_cast<std::size_t>(k)].size());
    if (size < min_size) throw EmptyGroup(k + 1, size, min_size);
  }

  mom.Sigma_Y = Matrix::Zero(mom.r, mom.r);
  for (int k = 0; k < M; ++k) {
    const auto& rows = members[static_cast<std::size_t>(k)];
    const int nk = static_cast<int>(rows.size());
    Matrix xk(nk, mom.p);
    Matrix yk(nk, mom.r);
    for (int i = 0; i < nk; ++i) {
      xk.row(i) = data.X.row(rows[static_cast<std::size_t>(i)]);
      yk.row(i) = data.Y.row(rows[static_cast<std::size_t>(i)]);
    }
    const Vector xbar = xk.colwise().mean();
    const Vector ybar = yk.colwise().mean();
    xk.rowwise() -= xbar.transpose();
    yk.rowwise() -= ybar.transpose();

    const Matrix xtx = xk.transpose() * xk;
    const Matrix yty = yk.transpose() * yk;
    Matrix beta = Matrix::Zero(mom.r, mom.p);
    Matrix fitted_ss = Matrix::Zero(mom.r, mom.r);
    if (mom.p > 0) {
      const Matrix ytx = yk.transpose() * xk;
      beta = linalg::solve_spd(xtx, ytx.transpose(), "X^T X").transpose();
      fitted_ss = beta * ytx.transpose();
    }
    mom.sizes.push_back(nk);
    mom.y_mean.push_back(ybar);
    mom.x_mean.push_back(xbar);
    mom.xtx.push_back(xtx);
    mom.ols_beta.push_back(beta);
    mom.Sigma_res.push_back(linalg::symmetrize(yty - fitted_ss) / nk);
    mom.Sigma_Y += yty;
  }
  mom.Sigma_Y = linalg::symmetrize(mom.Sigma_Y) / mom.n;
  return mom;
}

// ---------------------------------------------------------------------------
// Objective

GrassmannObjective::GrassmannObjective(const GroupedMoments& moments) {
  for (int k = 0; k < moments.M(); ++k) {
    weights_.push_back(static_cast<double>(moments.sizes[static_cast<std::size_t>(k)]) /
                       moments.n);
    sigma_res_.push_back(make_pd(moments.Sigma_res[static_cast<std::size_t>(k)], moments.variance_scale()));
  }
  sigma_y_inv_ = linalg::symmetrize(linalg::inverse_spd(moments.Sigma_Y, "Sigma_Y"));
}

double GrassmannObjective::evaluate(const Matrix& Gamma, Matrix* gradient) const {
  double value = 0.0;
  Matrix euclid;
  if (gradient) euclid = Matrix::Zero(Gamma.rows(), Gamma.cols());
  auto add_term = [&](const Matrix& s, double w) {
    const Matrix sg = s * Gamma;
    const Matrix inner = Gamma.transpose() * sg;
    Eigen::LLT<Matrix> llt(inner);
    if (llt.info() != Eigen::Success || !(llt.matrixLLT().diagonal().array() > 0.0).all()) {
      throw SingularMatrix("Gamma^T S Gamma is singular");
    }
    value += w * 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    if (gradient) euclid += (2.0 * w) * llt.solve(sg.transpose()).transpose();
  };
  for (std::size_t k = 0; k < sigma_res_.size(); ++k) add_term(sigma_res_[k], weights_[k]);
  add_term(sigma_y_inv_, 1.0);
  if (gradient) *gradient = euclid - Gamma * (Gamma.transpose() * euclid);
  return value;
}

double GrassmannObjective::value(const Matrix& Gamma) const { return evaluate(Gamma, nullptr); }

Matrix GrassmannObjective::riemannian_gradient(const Matrix& Gamma) const {
  Matrix g;
  evaluate(Gamma, &g);
  return g;
}

double grassmann_objective(const Matrix& Gamma, const GroupedMoments& moments) {
  if (Gamma.rows() != moments.r) throw ContractViolation("Gamma must have r rows");
  if (Gamma.cols() == 0) return 0.0;
  return GrassmannObjective(moments).value(Gamma);
}

// ---------------------------------------------------------------------------
// Optimizer

GammaFit optimize_gamma_from(const GrassmannObjective& objective, const Matrix& start,
                             const OptimizerConfig& cfg) {
  GammaFit fit;
  Matrix gamma = linalg::orthonormalize(start);
  Matrix grad;
  double value = objective.evaluate(gamma, &grad);
  fit.trace.push_back(value);
  double step = 1.0;
  Matrix prev_gamma;
  Matrix prev_grad;
  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    const double grad_sq = grad.squaredNorm();
    if (std::sqrt(grad_sq) <= cfg.grad_tol) {
      fit.converged = true;
      break;
    }
    if (iter > 0) {
      // Barzilai-Borwein guess for the initial trial step.
      const Matrix s = gamma - prev_gamma;
      const Matrix y = grad - prev_grad;
      const double sy = std::abs((s.array() * y.array()).sum());
      if (sy > 0.0) step = std::clamp(s.squaredNorm() / sy, 1e-10, 1e10);
    }
    bool accepted = false;
    Matrix trial;
    Matrix trial_grad;
    double trial_value = value;
    for (int ls = 0; ls < 60; ++ls) {
      trial = linalg::orthonormalize(gamma - step * grad);
      trial_value = objective.evaluate(trial, &trial_grad);
      if (std::isfinite(trial_value) && trial_value <= value - cfg.armijo_c * step * grad_sq) {
        accepted = true;
        break;
      }
      step *= cfg.backtrack;
    }
    if (!accepted) {
      // No representable decrease along the gradient: stationary to working
      // precision.
      fit.converged = std::sqrt(grad_sq) <= 1e-6 * std::max(1.0, std::abs(value));
      break;
    }
    prev_gamma = gamma;
    prev_grad = grad;
    gamma = trial;
    grad = trial_grad;
    value = trial_value;
    fit.trace.push_back(value);
  }
  fit.basis = EnvelopeBasis::from_gamma(gamma);
  fit.objective = value;
  return fit;
}

namespace {

/// Greedily picks u eigenvectors of `s`, one at a time, each minimizing the
/// objective given those already chosen.
Matrix greedy_eigen_start(const GrassmannObjective& objective, const Matrix& s, int u) {
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
  const Matrix& vecs = eig.eigenvectors();
  const auto r = vecs.cols();
  std::vector<bool> used(static_cast<std::size_t>(r), false);
  Matrix chosen(vecs.rows(), 0);
  for (int step = 0; step < u; ++step) {
    double best_value = std::numeric_limits<double>::infinity();
    Eigen::Index best_col = -1;
    Matrix trial(vecs.rows(), step + 1);
    trial.leftCols(step) = chosen;
    for (Eigen::Index j = 0; j < r; ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      trial.col(step) = vecs.col(j);
      double value = std::numeric_limits<double>::infinity();
      try {
        value = objective.value(trial);
      } catch (const SingularMatrix&) {
      }
      if (best_col < 0 || value < best_value) {
        best_value = value;
        best_col = j;
      }
    }
    used[static_cast<std::size_t>(best_col)] = true;
    chosen.conservativeResize(Eigen::NoChange, step + 1);
    chosen.col(step) = vecs.col(best_col);
  }
  return chosen;
}

}  // namespace

GammaFit fit_gamma(const GroupedMoments& moments, int u, const OptimizerConfig& cfg,
                   std::span<const Matrix> extra_starts) {
  if (u < 1 || u > moments.r - 1) throw ContractViolation("fit_gamma needs 1 <= u <= r-1");
  const GrassmannObjective objective(moments);

  std::vector<Matrix> starts(extra_starts.begin(), extra_starts.end());
  for (const auto& s : starts) {
    if (s.rows() != moments.r || s.cols() != u) {
      throw ContractViolation("extra start has wrong shape");
    }
  }
  const int n_starts = std::max(1, cfg.n_starts);
  starts.push_back(linalg::top_eigenvectors(moments.Sigma_Y, u));
  if (n_starts >= 2) starts.push_back(linalg::top_eigenvectors(moments.pooled_residual(), u));
  Rng rng(derive_seed(cfg.seed, 0x67726173ULL));
  for (int s = 2; s < n_starts; ++s) starts.push_back(linalg::random_orthonormal(moments.r, u, rng));
  if (cfg.greedy_starts) {
    starts.push_back(greedy_eigen_start(objective, moments.Sigma_Y, u));
    starts.push_back(greedy_eigen_start(objective, moments.pooled_residual(), u));
  }

  GammaFit best;
  best.objective = std::numeric_limits<double>::infinity();
  bool have_best = false;
  for (std::size_t s = 0; s < starts.size(); ++s) {
    GammaFit fit;
    try {
      fit = optimize_gamma_from(objective, starts[s], cfg);
    } catch (const SingularMatrix&) {
      continue;
    }
    if (!have_best || fit.objective < best.objective) {
      best = std::move(fit);
      best.winning_start = static_cast<int>(s);
      have_best = true;
    }
  }
  if (!have_best) throw SingularMatrix("every Grassmann start hit a singular objective");
  return best;
}

// ---------------------------------------------------------------------------
// Coordinates

GroupwiseFit coordinate_estimates(const EnvelopeBasis& basis, const GroupedMoments& moments) {
  if (basis.r() != moments.r) throw ContractViolation("basis dimension does not match moments");
  GroupwiseFit fit;
  fit.basis = basis;
  const Matrix& gamma = basis.Gamma;
  for (int k = 0; k < moments.M(); ++k) {
    const auto idx = static_cast<std::size_t>(k);
    GroupParams g;
    g.mu = moments.y_mean[idx];
    g.x_center = moments.x_mean[idx];
    g.eta = gamma.transpose() * moments.ols_beta[idx];
    g.Omega = make_pd(gamma.transpose() * moments.Sigma_res[idx] * gamma, moments.variance_scale());
    fit.beta.push_back(gamma * g.eta);
    fit.groups.push_back(std::move(g));
  }
  fit.Omega0 = make_pd(basis.Gamma0.transpose() * moments.Sigma_Y * basis.Gamma0, moments.variance_scale());
  return fit;
}

GroupwiseFit fit_groupwise_envelope(const GroupedMoments& moments, int u,
                                    const OptimizerConfig& cfg,
                                    std::span<const Matrix> extra_starts) {
  const int r = moments.r;
  if (u < 0 || u > r) throw ContractViolation("u must lie in 0..r");
  if (u == 0 || u == r) {
    GroupwiseFit fit = coordinate_estimates(EnvelopeBasis::axis_aligned(r, u), moments);
    if (u == r) {
      fit.objective_value = grassmann_objective(fit.basis.Gamma, moments);
    }
    fit.optimizer_trace = {fit.objective_value};
    return fit;
  }
  GammaFit gamma = fit_gamma(moments, u, cfg, extra_starts);
  GroupwiseFit fit = coordinate_estimates(gamma.basis, moments);
  fit.objective_value = gamma.objective;
  fit.optimizer_trace = std::move(gamma.trace);
  fit.optimizer_converged = gamma.converged;
  return fit;
}

GroupwiseFit fit_groupwise_envelope(const Dataset& data, const LabelVector& labels, int M, int u,
                                    const OptimizerConfig& cfg,
                                    std::span<const Matrix> extra_starts) {
  if (u < 0 || u > data.r()) throw ContractViolation("u must lie in 0..r");
  const GroupedMoments moments = compute_moments(data, labels, M, min_group_size(u, data.p(), data.r()));
  return fit_groupwise_envelope(moments, u, cfg, extra_starts);
}

}  // namespace envmix
