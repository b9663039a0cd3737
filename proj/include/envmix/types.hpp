#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace envmix {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition or dimension mismatch detected on entry.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// A symmetric matrix could not be factorized even after ridge regularization.
class SingularMatrix : public Error {
 public:
  using Error::Error;
};

/// A cluster has fewer observations than the envelope fit needs.
class EmptyGroup : public Error {
 public:
  EmptyGroup(int group, int size, int required)
      : Error("group " + std::to_string(group) + " has " + std::to_string(size) +
              " observations, need at least " + std::to_string(required)),
        group_(group), size_(size) {}
  int group() const { return group_; }  // 1-based
  int size() const { return size_; }

 private:
  int group_;
  int size_;
};

/// Malformed input data (files, labels out of range).
class DataError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Data

/// Labels are 1-based cluster indices, as in the model notation.
using LabelVector = std::vector<int>;

struct Dataset {
  Matrix X;  // n x p predictors
  Matrix Y;  // n x r responses
  std::optional<LabelVector> true_labels;

  Dataset() = default;
  Dataset(Matrix x, Matrix y, std::optional<LabelVector> labels = std::nullopt);

  int n() const { return static_cast<int>(X.rows()); }
  int p() const { return static_cast<int>(X.cols()); }
  int r() const { return static_cast<int>(Y.cols()); }

  /// Rows selected by index, labels carried along.
  Dataset subset(const std::vector<int>& rows) const;
};

void validate_labels(const LabelVector& labels, int n, int M);

/// Orthonormal pair (Gamma, Gamma0) spanning the envelope and its complement.
struct EnvelopeBasis {
  Matrix Gamma;   // r x u
  Matrix Gamma0;  // r x (r - u)

  EnvelopeBasis() = default;
  EnvelopeBasis(Matrix gamma, Matrix gamma0);

  /// Completes an orthonormal Gamma with an orthonormal complement.
  static EnvelopeBasis from_gamma(const Matrix& gamma);
  /// Gamma = first u columns of the identity.
  static EnvelopeBasis axis_aligned(int r, int u);

  int r() const { return static_cast<int>(Gamma.rows()); }
  int u() const { return static_cast<int>(Gamma.cols()); }

  /// Max deviation from orthonormality of [Gamma Gamma0].
  double orthonormality_error() const;
};

/// Per-cluster coordinates. The conditional mean of Y is
/// mu + Gamma * eta * (x - x_center); x_center is zero for raw-intercept
/// parameterizations and the group predictor mean for fitted groups.
struct GroupParams {
  Vector mu;        // r
  Matrix eta;       // u x p
  Matrix Omega;     // u x u
  Vector x_center;  // p

  Matrix beta(const EnvelopeBasis& basis) const { return basis.Gamma * eta; }
  Vector mean(const EnvelopeBasis& basis, const Eigen::Ref<const Vector>& x) const;
};

struct MixtureParams {
  Vector pi;
  std::vector<GroupParams> groups;
  EnvelopeBasis basis;
  Matrix Omega0;  // (r - u) x (r - u)

  int M() const { return static_cast<int>(groups.size()); }
  int r() const { return basis.r(); }
  int u() const { return basis.u(); }
  int p() const { return groups.empty() ? 0 : static_cast<int>(groups.front().eta.cols()); }

  /// Throws ContractViolation when dimensions disagree or pi is not a
  /// probability vector.
  void validate() const;
};

inline constexpr double kPiFloor = 1e-6;

/// Clips entries below kPiFloor and renormalizes.
Vector clip_proportions(Vector pi);

}  // namespace envmix
