#pragma once

#include "envmix/types.hpp"

namespace envmix {

/// Sigma = Gamma Omega Gamma^T + Gamma0 Omega0 Gamma0^T.
Matrix assemble_sigma(const EnvelopeBasis& basis, const Matrix& Omega, const Matrix& Omega0);

/// Factorized Omega / Omega0 for repeated density evaluation of one
/// component. Building it validates positive definiteness.
class ComponentDensity {
 public:
  ComponentDensity(const GroupParams& group, const EnvelopeBasis& basis, const Matrix& Omega0);

  double operator()(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) const;

 private:
  const GroupParams* group_;
  const EnvelopeBasis* basis_;
  Eigen::LLT<Matrix> omega_llt_;
  Eigen::LLT<Matrix> omega0_llt_;
  double constant_;  // everything but the two quadratic forms
};

/// Conditional log-density of y given x in one envelope component: the
/// material part Gamma^T y is Normal(Gamma^T mu + eta (x - x_center), Omega),
/// the immaterial part Gamma0^T y is Normal(Gamma0^T mu, Omega0).
double log_density_k(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y,
                     const GroupParams& group, const EnvelopeBasis& basis, const Matrix& Omega0);

/// n x M matrix of log(pi_k) + log f_k(x_i, y_i).
Matrix weighted_log_densities(const Dataset& data, const MixtureParams& theta);

/// Observed-data log-likelihood sum_i log sum_k pi_k f_k(x_i, y_i).
double mixture_loglik(const Dataset& data, const MixtureParams& theta);

/// Row-wise log-sum-exp.
Vector log_sum_exp_rows(const Matrix& a);

}  // namespace envmix
