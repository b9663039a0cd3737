#include "envmix/model_core.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

using namespace envmix;
using namespace envmix::testing;

namespace {

// Gaussian log-density through LU, independent of the envelope factorization.
double direct_mvn_logpdf(const Vector& y, const Vector& mean, const Matrix& sigma) {
  Eigen::FullPivLU<Matrix> lu(sigma);
  const Vector d = y - mean;
  return -0.5 * y.size() * std::log(2.0 * std::numbers::pi) - 0.5 * std::log(lu.determinant()) -
         0.5 * d.dot(lu.solve(d));
}

double scalar_normal_logpdf(double y, double mean, double var) {
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * (y - mean) * (y - mean) / var;
}

}  // namespace

TEST(AssembleSigma, AxisAlignedIsDiagonal) {
  const auto basis = EnvelopeBasis::axis_aligned(2, 1);
  const Matrix s = assemble_sigma(basis, Matrix::Constant(1, 1, 2.0), Matrix::Constant(1, 1, 3.0));
  EXPECT_TRUE(s.isApprox(Vector(Eigen::Vector2d(2.0, 3.0)).asDiagonal().toDenseMatrix(), 1e-15));
}

TEST(AssembleSigma, FullDimensionIdentity) {
  const auto basis = EnvelopeBasis::axis_aligned(4, 4);
  const Matrix s = assemble_sigma(basis, Matrix::Identity(4, 4), Matrix(0, 0));
  EXPECT_TRUE(s.isApprox(Matrix::Identity(4, 4), 1e-15));
}

TEST(AssembleSigma, EigenvaluesAreUnionOfBlocks) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto basis = EnvelopeBasis::from_gamma(linalg::random_orthonormal(3, 1, rng));
    const Matrix omega = random_spd(1, rng);
    const Matrix omega0 = random_spd(2, rng);
    const Matrix s = assemble_sigma(basis, omega, omega0);
    EXPECT_LE((s - s.transpose()).cwiseAbs().maxCoeff(), 1e-12);

    std::vector<double> expected{omega(0, 0)};
    Eigen::SelfAdjointEigenSolver<Matrix> e0(omega0);
    for (int i = 0; i < 2; ++i) expected.push_back(e0.eigenvalues()[i]);
    std::sort(expected.begin(), expected.end());
    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(es.eigenvalues()[i], expected[static_cast<std::size_t>(i)], 1e-10);
    EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(AssembleSigma, DimensionMismatchThrows) {
  const auto basis = EnvelopeBasis::axis_aligned(3, 1);
  EXPECT_THROW(assemble_sigma(basis, Matrix::Identity(2, 2), Matrix::Identity(2, 2)), ContractViolation);
}

TEST(LogDensity, StandardNormalAtMode) {
  GroupParams g{Vector::Zero(1), Matrix::Zero(1, 1), Matrix::Identity(1, 1), Vector::Zero(1)};
  const auto basis = EnvelopeBasis::axis_aligned(1, 1);
  Vector x(1);
  x << 3.7;
  EXPECT_NEAR(log_density_k(x, Vector::Zero(1), g, basis, Matrix(0, 0)), -0.5 * std::log(2.0 * std::numbers::pi),
              1e-15);
}

TEST(LogDensity, FullDimensionMatchesDirectGaussian) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto theta = random_params(1, 3, 3, 2, rng);
    const auto& g = theta.groups[0];
    const Vector x = random_normal(2, 1, rng);
    const Vector y = random_normal(3, 1, rng);
    const Matrix beta = theta.basis.Gamma * g.eta;
    const Matrix sigma = theta.basis.Gamma * g.Omega * theta.basis.Gamma.transpose();
    EXPECT_NEAR(log_density_k(x, y, g, theta.basis, theta.Omega0),
                direct_mvn_logpdf(y, g.mu + beta * (x - g.x_center), sigma), 1e-10);
  }
}

// The envelope form of the density is an algebraic re-expression of the
// full Gaussian with covariance Gamma Omega Gamma^T + Gamma0 Omega0 Gamma0^T.
TEST(LogDensity, MatchesDirectGaussianOverRandomDraws) {
  Rng rng(2024);
  std::uniform_int_distribution<int> dim(1, 6);
  for (int trial = 0; trial < 100; ++trial) {
    const int r = dim(rng);
    const int u = std::uniform_int_distribution<int>(0, r)(rng);
    const int p = dim(rng);
    const auto theta = random_params(1, r, u, p, rng);
    const auto& g = theta.groups[0];
    const Vector x = 2.0 * random_normal(p, 1, rng);
    const Vector y = 2.0 * random_normal(r, 1, rng);
    const Matrix sigma = assemble_sigma(theta.basis, g.Omega, theta.Omega0);
    const Vector mean = g.mu + theta.basis.Gamma * g.eta * (x - g.x_center);
    EXPECT_NEAR(log_density_k(x, y, g, theta.basis, theta.Omega0), direct_mvn_logpdf(y, mean, sigma), 1e-10)
        << "trial " << trial << " r=" << r << " u=" << u;
  }
}

TEST(LogDensity, NonPositiveDefiniteThrows) {
  const auto basis = EnvelopeBasis::axis_aligned(2, 1);
  GroupParams g{Vector::Zero(2), Matrix::Zero(1, 1), Matrix::Constant(1, 1, -1.0), Vector::Zero(1)};
  EXPECT_THROW(log_density_k(Vector::Zero(1), Vector::Zero(2), g, basis, Matrix::Identity(1, 1)), ContractViolation);
  g.Omega(0, 0) = 1.0;
  EXPECT_THROW(log_density_k(Vector::Zero(1), Vector::Zero(2), g, basis, Matrix::Zero(1, 1)), ContractViolation);
}

TEST(MixtureLoglik, SingleComponentIsSumOfDensities) {
  Rng rng(8);
  const auto theta = random_params(1, 4, 2, 3, rng);
  const Dataset data = sample_dataset(theta, 25, rng);
  double sum = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    sum += log_density_k(data.X.row(i).transpose(), data.Y.row(i).transpose(), theta.groups[0], theta.basis,
                         theta.Omega0);
  }
  EXPECT_NEAR(mixture_loglik(data, theta), sum, 1e-9);
}

TEST(MixtureLoglik, DuplicatedComponentEqualsSingle) {
  Rng rng(9);
  const auto single = random_params(1, 3, 1, 2, rng);
  MixtureParams doubled = single;
  doubled.groups.push_back(single.groups[0]);
  doubled.pi = Vector::Constant(2, 0.5);
  const Dataset data = sample_dataset(single, 30, rng);
  EXPECT_NEAR(mixture_loglik(data, doubled), mixture_loglik(data, single), 1e-9);
}

TEST(MixtureLoglik, HandBuiltThreeObservations) {
  // r = u = p = 1, two components.
  MixtureParams theta;
  theta.basis = EnvelopeBasis::axis_aligned(1, 1);
  theta.Omega0 = Matrix(0, 0);
  theta.pi = Eigen::Vector2d(0.3, 0.7);
  theta.groups = {
      GroupParams{Vector::Constant(1, 1.0), Matrix::Constant(1, 1, 2.0), Matrix::Constant(1, 1, 0.5),
                  Vector::Constant(1, 0.25)},
      GroupParams{Vector::Constant(1, -1.0), Matrix::Constant(1, 1, -0.5), Matrix::Constant(1, 1, 2.0),
                  Vector::Constant(1, 0.0)},
  };
  Matrix x(3, 1), y(3, 1);
  x << 0.0, 1.0, -2.0;
  y << 0.5, 3.0, -0.2;
  const Dataset data(x, y);

  double expected = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double m1 = 1.0 + 2.0 * (x(i, 0) - 0.25);
    const double m2 = -1.0 - 0.5 * x(i, 0);
    expected += std::log(0.3 * std::exp(scalar_normal_logpdf(y(i, 0), m1, 0.5)) +
                         0.7 * std::exp(scalar_normal_logpdf(y(i, 0), m2, 2.0)));
  }
  EXPECT_NEAR(mixture_loglik(data, theta), expected, 1e-12);
}

TEST(MixtureLoglik, PermutationInvariance) {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const int M = std::uniform_int_distribution<int>(2, 4)(rng);
    const int r = std::uniform_int_distribution<int>(1, 5)(rng);
    const int u = std::uniform_int_distribution<int>(0, r)(rng);
    const auto theta = random_params(M, r, u, 2, rng);
    const Dataset data = sample_dataset(theta, 20, rng);
    std::vector<int> perm(static_cast<std::size_t>(M));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    MixtureParams permuted = theta;
    for (int k = 0; k < M; ++k) {
      permuted.pi[k] = theta.pi[perm[static_cast<std::size_t>(k)]];
      permuted.groups[static_cast<std::size_t>(k)] = theta.groups[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])];
    }
    const double a = mixture_loglik(data, theta);
    EXPECT_NEAR(mixture_loglik(data, permuted), a, 1e-10 * std::max(1.0, std::abs(a)));
  }
}

TEST(MixtureLoglik, BasisRotationInvariance) {
  Rng rng(32);
  for (int trial = 0; trial < 50; ++trial) {
    const int r = std::uniform_int_distribution<int>(2, 6)(rng);
    const int u = std::uniform_int_distribution<int>(1, r)(rng);
    const auto theta = random_params(2, r, u, 3, rng);
    const Dataset data = sample_dataset(theta, 20, rng);
    const Matrix o = linalg::random_orthonormal(u, u, rng);
    MixtureParams rotated = theta;
    rotated.basis = EnvelopeBasis(theta.basis.Gamma * o, theta.basis.Gamma0);
    for (auto& g : rotated.groups) {
      g.eta = o.transpose() * g.eta;
      g.Omega = o.transpose() * g.Omega * o;
    }
    const double a = mixture_loglik(data, theta);
    EXPECT_NEAR(mixture_loglik(data, rotated), a, 1e-9 * std::max(1.0, std::abs(a)));
  }
}

TEST(MixtureLoglik, StableForFarOutliers) {
  Rng rng(3);
  const auto theta = random_params(2, 3, 1, 2, rng);
  Dataset data = sample_dataset(theta, 5, rng);
  data.Y.row(0).array() += 1e4;
  const double ll = mixture_loglik(data, theta);
  EXPECT_TRUE(std::isfinite(ll));
}

TEST(LogSumExp, MatchesNaiveAndSurvivesLargeValues) {
  Matrix a(2, 3);
  a << 0.1, -1.0, 2.0, 1000.0, 1000.0, -5000.0;
  const Vector l = log_sum_exp_rows(a);
  EXPECT_NEAR(l[0], std::log(std::exp(0.1) + std::exp(-1.0) + std::exp(2.0)), 1e-14);
  EXPECT_NEAR(l[1], 1000.0 + std::log(2.0), 1e-12);
}

TEST(MixtureParams, ValidateAndPiFloor) {
  Rng rng(1);
  auto theta = random_params(2, 3, 1, 2, rng);
  EXPECT_NO_THROW(theta.validate());
  theta.pi = Eigen::Vector2d(0.5, 0.6);
  EXPECT_THROW(theta.validate(), ContractViolation);

  const Vector clipped = clip_proportions(Eigen::Vector3d(0.0, 0.5, 0.5));
  EXPECT_NEAR(clipped.sum(), 1.0, 1e-12);
  EXPECT_GE(clipped.minCoeff(), kPiFloor * (1.0 - 1e-9));
}

TEST(EnvelopeBasis, CompletionIsOrthonormal) {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const int r = std::uniform_int_distribution<int>(1, 8)(rng);
    const int u = std::uniform_int_distribution<int>(0, r)(rng);
    const auto basis = u == 0 ? EnvelopeBasis::axis_aligned(r, 0)
                              : EnvelopeBasis::from_gamma(linalg::random_orthonormal(r, u, rng));
    EXPECT_EQ(basis.Gamma0.cols(), r - u);
    EXPECT_LE(basis.orthonormality_error(), 1e-10);
  }
}

TEST(Dataset, RejectsMismatchedRows) {
  EXPECT_THROW(Dataset(Matrix::Zero(3, 2), Matrix::Zero(4, 1)), ContractViolation);
  EXPECT_THROW(Dataset(Matrix::Zero(2, 1), Matrix::Zero(2, 1), LabelVector{1}), ContractViolation);
  EXPECT_THROW(validate_labels({1, 3}, 2, 2), ContractViolation);
}
