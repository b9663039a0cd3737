#include "envmix/types.hpp"

#include "envmix/linalg.hpp"

#include <cmath>

namespace envmix {

Dataset::Dataset(Matrix x, Matrix y, std::optional<LabelVector> labels)
    : X(std::move(x)), Y(std::move(y)), true_labels(std::move(labels)) {
  if (X.rows() != Y.rows()) {
    throw ContractViolation("X has " + std::to_string(X.rows()) + " rows but Y has " +
                            std::to_string(Y.rows()));
  }
  if (X.rows() < 1) throw ContractViolation("dataset must have at least one row");
  if (true_labels && static_cast<Eigen::Index>(true_labels->size()) != X.rows()) {
    throw ContractViolation("true_labels length does not match row count");
  }
  if (true_labels) {
    for (int label : *true_labels) {
      if (label < 1) throw ContractViolation("labels must be >= 1");
    }
  }
}

Dataset Dataset::subset(const std::vector<int>& rows) const {
  Dataset out;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
  out.Y.resize(static_cast<Eigen::Index>(rows.size()), Y.cols());
  if (true_labels) out.true_labels = LabelVector(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int row = rows[i];
    out.X.row(static_cast<Eigen::Index>(i)) = X.row(row);
    out.Y.row(static_cast<Eigen::Index>(i)) = Y.row(row);
    if (true_labels) (*out.true_labels)[i] = (*true_labels)[static_cast<std::size_t>(row)];
  }
  return out;
}

void validate_labels(const LabelVector& labels, int n, int M) {
  if (static_cast<int>(labels.size()) != n) {
    throw ContractViolation("label vector has length " + std::to_string(labels.size()) +
                            ", expected " + std::to_string(n));
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 1 || labels[i] > M) {
      throw ContractViolation("label " + std::to_string(labels[i]) + " at position " +
                              std::to_string(i) + " outside 1.." + std::to_string(M));
    }
  }
}

EnvelopeBasis::EnvelopeBasis(Matrix gamma, Matrix gamma0)
    : Gamma(std::move(gamma)), Gamma0(std::move(gamma0)) {
  if (Gamma.rows() != Gamma0.rows() && Gamma.cols() > 0 && Gamma0.cols() > 0) {
    throw ContractViolation("Gamma and Gamma0 row counts differ");
  }
  const Eigen::Index r = std::max(Gamma.rows(), Gamma0.rows());
  if (Gamma.cols() + Gamma0.cols() != r) {
    throw ContractViolation("Gamma and Gamma0 column counts must sum to r");
  }
  // Keep row counts consistent for the degenerate u = 0 and u = r cases.
  if (Gamma.cols() == 0) Gamma.resize(r, 0);
  if (Gamma0.cols() == 0) Gamma0.resize(r, 0);
}

EnvelopeBasis EnvelopeBasis::from_gamma(const Matrix& gamma) {
  return EnvelopeBasis(gamma, linalg::orthonormal_complement(gamma));
}

EnvelopeBasis EnvelopeBasis::axis_aligned(int r, int u) {
  if (u < 0 || u > r) throw ContractViolation("u must lie in 0..r");
  Matrix eye = Matrix::Identity(r, r);
  return EnvelopeBasis(eye.leftCols(u), eye.rightCols(r - u));
}

double EnvelopeBasis::orthonormality_error() const {
  Matrix full(r(), r());
  full << Gamma, Gamma0;
  return (full.transpose() * full - Matrix::Identity(r(), r())).cwiseAbs().maxCoeff();
}

Vector GroupParams::mean(const EnvelopeBasis& basis, const Eigen::Ref<const Vector>& x) const {
  if (eta.rows() == 0) return mu;
  return mu + basis.Gamma * (eta * (x - x_center));
}

void MixtureParams::validate() const {
  const int m = M();
  if (m < 1) throw ContractViolation("mixture needs at least one component");
  if (pi.size() != m) throw ContractViolation("pi length does not match component count");
  if (std::abs(pi.sum() - 1.0) > 1e-10) throw ContractViolation("pi does not sum to 1");
  if ((pi.array() < 0.0).any()) throw ContractViolation("pi has negative entries");
  const int rr = r();
  const int uu = u();
  if (Omega0.rows() != rr - uu || Omega0.cols() != rr - uu) {
    throw ContractViolation("Omega0 must be (r-u) x (r-u)");
  }
  const int pp = p();
  for (const auto& g : groups) {
    if (g.mu.size() != rr) throw ContractViolation("mu has wrong length");
    if (g.eta.rows() != uu || g.eta.cols() != pp) throw ContractViolation("eta must be u x p");
    if (g.Omega.rows() != uu || g.Omega.cols() != uu) throw ContractViolation("Omega must be u x u");
    if (g.x_center.size() != pp) throw ContractViolation("x_center must have length p");
  }
}

Vector clip_proportions(Vector pi) {
  if (pi.size() == 0) return pi;
  pi = pi.cwiseMax(0.0);
  double total = pi.sum();
  if (total <= 0.0) return Vector::Constant(pi.size(), 1.0 / static_cast<double>(pi.size()));
  pi /= total;
  std::vector<bool> clipped(static_cast<std::size_t>(pi.size()), false);
  for (int pass = 0; pass < pi.size(); ++pass) {
    bool changed = false;
    double clipped_mass = 0.0;
    double free_mass = 0.0;
    for (Eigen::Index k = 0; k < pi.size(); ++k) {
      if (!clipped[static_cast<std::size_t>(k)] && pi[k] < kPiFloor) {
        clipped[static_cast<std::size_t>(k)] = true;
        changed = true;
      }
      if (clipped[static_cast<std::size_t>(k)]) {
        clipped_mass += kPiFloor;
      } else {
        free_mass += pi[k];
      }
    }
    if (!changed) break;
    const double scale = (1.0 - clipped_mass) / free_mass;
    for (Eigen::Index k = 0; k < pi.size(); ++k) {
      pi[k] = clipped[static_cast<std::size_t>(k)] ? kPiFloor : pi[k] * scale;
    }
  }
  return pi;
}

}  // namespace envmix
