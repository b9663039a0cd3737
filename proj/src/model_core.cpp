#include "envmix/model_core.hpp"

#include "envmix/linalg.hpp"

#include <cmath>
#include <numbers>

namespace envmix {

namespace {

Eigen::LLT<Matrix> checked_llt(const Matrix& a, const char* what) {
  Eigen::LLT<Matrix> llt(a);
  if (a.rows() > 0 &&
      (llt.info() != Eigen::Success || !(llt.matrixLLT().diagonal().array() > 0.0).all())) {
    throw ContractViolation(std::string(what) + " is not positive definite");
  }
  return llt;
}

double llt_logdet(const Eigen::LLT<Matrix>& llt) {
  if (llt.matrixLLT().rows() == 0) return 0.0;
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace

Matrix assemble_sigma(const EnvelopeBasis& basis, const Matrix& Omega, const Matrix& Omega0) {
  if (Omega.rows() != basis.u() || Omega.cols() != basis.u()) {
    throw ContractViolation("Omega must be u x u");
  }
  const int r0 = basis.r() - basis.u();
  if (Omega0.rows() != r0 || Omega0.cols() != r0) {
    throw ContractViolation("Omega0 must be (r-u) x (r-u)");
  }
  Matrix sigma = basis.Gamma * Omega * basis.Gamma.transpose() +
                 basis.Gamma0 * Omega0 * basis.Gamma0.transpose();
  return linalg::symmetrize(sigma);
}

ComponentDensity::ComponentDensity(const GroupParams& group, const EnvelopeBasis& basis,
                                   const Matrix& Omega0)
    : group_(&group), basis_(&basis) {
  const int u = basis.u();
  const int r = basis.r();
  if (group.Omega.rows() != u || Omega0.rows() != r - u || group.mu.size() != r ||
      group.eta.rows() != u) {
    throw ContractViolation("component parameters do not match the basis dimensions");
  }
  omega_llt_ = checked_llt(group.Omega, "Omega_k");
  omega0_llt_ = checked_llt(Omega0, "Omega0");
  constant_ = -0.5 * r * std::log(2.0 * std::numbers::pi) - 0.5 * llt_logdet(omega0_llt_) -
              0.5 * llt_logdet(omega_llt_);
}

double ComponentDensity::operator()(const Eigen::Ref<const Vector>& x,
                                    const Eigen::Ref<const Vector>& y) const {
  const Vector centered = y - group_->mu;
  double value = constant_;
  if (basis_->u() > 0) {
    const Vector material =
        basis_->Gamma.transpose() * centered - group_->eta * (x - group_->x_center);
    value -= 0.5 * material.dot(omega_llt_.solve(material));
  }
  if (basis_->u() < basis_->r()) {
    const Vector immaterial = basis_->Gamma0.transpose() * centered;
    value -= 0.5 * immaterial.dot(omega0_llt_.solve(immaterial));
  }
  return value;
}

double log_density_k(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y,
                     const GroupParams& group, const EnvelopeBasis& basis, const Matrix& Omega0) {
  return ComponentDensity(group, basis, Omega0)(x, y);
}

Matrix weighted_log_densities(const Dataset& data, const MixtureParams& theta) {
  theta.validate();
  if (data.n() < 1) throw ContractViolation("empty dataset");
  if (data.r() != theta.r() || data.p() != theta.p()) {
    throw ContractViolation("dataset dimensions do not match parameters");
  }
  const int n = data.n();
  const int m = theta.M();
  Matrix out(n, m);
  for (int k = 0; k < m; ++k) {
    const ComponentDensity density(theta.groups[static_cast<std::size_t>(k)], theta.basis,
                                   theta.Omega0);
    const double log_pi = std::log(theta.pi[k]);
    for (int i = 0; i < n; ++i) {
      out(i, k) = log_pi + density(data.X.row(i).transpose(), data.Y.row(i).transpose());
    }
  }
  return out;
}

Vector log_sum_exp_rows(const Matrix& a) {
  Vector out(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double top = a.row(i).maxCoeff();
    if (!std::isfinite(top)) {
      out[i] = top;
      continue;
    }
    out[i] = top + std::log((a.row(i).array() - top).exp().sum());
  }
  return out;
}

double mixture_loglik(const Dataset& data, const MixtureParams& theta) {
  return log_sum_exp_rows(weighted_log_densities(data, theta)).sum();
}

}  // namespace envmix
