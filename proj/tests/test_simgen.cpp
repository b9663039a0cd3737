#include "envmix/model_core.hpp"
#include "envmix/simgen.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace envmix;

TEST(GroupSizes, DefaultProportions) {
  ScenarioConfig two;
  EXPECT_EQ(group_sizes(two.resolved_proportions(), 300), (std::vector<int>{120, 180}));
  ScenarioConfig three;
  three.M = 3;
  EXPECT_EQ(group_sizes(three.resolved_proportions(), 300), (std::vector<int>{100, 100, 100}));
}

TEST(GroupSizes, LargestRemainder) {
  EXPECT_EQ(group_sizes({1.0 / 3, 1.0 / 3, 1.0 / 3}, 100), (std::vector<int>{34, 33, 33}));
  EXPECT_EQ(group_sizes({0.15, 0.85}, 10), (std::vector<int>{2, 8}));
  EXPECT_EQ(group_sizes({0.5, 0.5}, 7), (std::vector<int>{4, 3}));
}

TEST(GenerateScenario, LabelsFollowProportions) {
  ScenarioConfig cfg;
  cfg.seed = 7;
  const SimDataset sim = generate_scenario(cfg);
  const auto& labels = *sim.data.true_labels;
  EXPECT_EQ(std::count(labels.begin(), labels.end(), 1), 120);
  EXPECT_EQ(std::count(labels.begin(), labels.end(), 2), 180);
  EXPECT_EQ(sim.data.n(), 300);
  EXPECT_EQ(sim.data.r(), 10);
  EXPECT_EQ(sim.data.p(), 20);
}

TEST(GenerateScenario, BitIdenticalUnderSeed) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    ScenarioConfig cfg;
    cfg.seed = seed;
    cfg.n = 60;
    cfg.M = 2 + static_cast<int>(seed % 2);
    const SimDataset a = generate_scenario(cfg);
    const SimDataset b = generate_scenario(cfg);
    ASSERT_EQ(a.data.X, b.data.X);
    ASSERT_EQ(a.data.Y, b.data.Y);
    ASSERT_EQ(*a.data.true_labels, *b.data.true_labels);
    ASSERT_EQ(a.truth.basis.Gamma, b.truth.basis.Gamma);
    ASSERT_EQ(a.truth.Omega0, b.truth.Omega0);
  }
  ScenarioConfig c1, c2;
  c2.seed = 1;
  EXPECT_NE(generate_scenario(c1).data.Y, generate_scenario(c2).data.Y);
}

TEST(GenerateScenario, TruthStructure) {
  for (int M : {2, 3}) {
    for (int u : {1, 3}) {
      ScenarioConfig cfg;
      cfg.M = M;
      cfg.u = u;
      cfg.seed = static_cast<std::uint64_t>(10 * M + u);
      const SimDataset sim = generate_scenario(cfg);
      const auto& truth = sim.truth;
      EXPECT_NO_THROW(truth.validate());
      EXPECT_EQ(sim.extended_u, u > 1);
      Matrix g(10, 10);
      g << truth.basis.Gamma, truth.basis.Gamma0;
      EXPECT_LE((g.transpose() * g - Matrix::Identity(10, 10)).cwiseAbs().maxCoeff(), 1e-10);
      EXPECT_GT(Eigen::SelfAdjointEigenSolver<Matrix>(truth.Omega0).eigenvalues().minCoeff(), 0.0);
      const Matrix P = truth.basis.Gamma * truth.basis.Gamma.transpose();
      const Matrix Q = Matrix::Identity(10, 10) - P;
      for (int k = 0; k < M; ++k) {
        const auto& grp = truth.groups[static_cast<std::size_t>(k)];
        EXPECT_TRUE(grp.mu.isApprox(Vector::Constant(10, k + 1.0)));
        EXPECT_GE(grp.eta.minCoeff(), 0.0);
        EXPECT_EQ(grp.eta.rows(), u);
        EXPECT_EQ(grp.eta.cols(), 20);
        EXPECT_TRUE(grp.x_center.isZero());
        EXPECT_TRUE(grp.Omega.isDiagonal());
        EXPECT_GT(grp.Omega.diagonal().minCoeff(), 0.0);
        const Matrix sigma = assemble_sigma(truth.basis, grp.Omega, truth.Omega0);
        EXPECT_LE((P * sigma * P + Q * sigma * Q - sigma).cwiseAbs().maxCoeff(), 1e-10 * sigma.norm());
      }
    }
  }
}

TEST(GenerateScenario, GroupMomentsMatchTruth) {
  ScenarioConfig cfg;
  cfg.n = 3000;
  cfg.seed = 21;
  const SimDataset sim = generate_scenario(cfg);
  const auto& truth = sim.truth;
  const auto& labels = *sim.data.true_labels;
  const Vector ex = Vector::Ones(cfg.p);  // predictors are Normal(1, 1)
  for (int k = 0; k < 2; ++k) {
    const auto& grp = truth.groups[static_cast<std::size_t>(k)];
    const Matrix beta = grp.beta(truth.basis);
    const Matrix sigma = assemble_sigma(truth.basis, grp.Omega, truth.Omega0);
    const Matrix var_y = sigma + beta * beta.transpose();
    Vector mean_y = Vector::Zero(cfg.r);
    double score_ss = 0.0;
    int nk = 0;
    for (int i = 0; i < cfg.n; ++i) {
      if (labels[static_cast<std::size_t>(i)] != k + 1) continue;
      ++nk;
      mean_y += sim.data.Y.row(i).transpose();
      const Vector resid = sim.data.Y.row(i).transpose() - grp.mu - beta * sim.data.X.row(i).transpose();
      const double s = (truth.basis.Gamma.transpose() * resid)(0);
      score_ss += s * s;
    }
    mean_y /= nk;
    const Vector centered = mean_y - beta * ex - grp.mu;
    for (int j = 0; j < cfg.r; ++j) {
      EXPECT_LE(std::abs(centered[j]), 3.0 * std::sqrt(var_y(j, j) / nk)) << "group " << k << " coord " << j;
    }
    // Envelope scores have known mean zero, so score_ss / n_k estimates Omega_k.
    const double omega = grp.Omega(0, 0);
    EXPECT_LE(std::abs(score_ss / nk - omega), 3.0 * omega * std::sqrt(2.0 / nk));
  }
}

TEST(ScenarioConfig, Validation) {
  ScenarioConfig cfg;
  cfg.proportions = {0.5, 0.6};
  EXPECT_THROW(cfg.validate(), ContractViolation);
  cfg.proportions = {1.0};
  EXPECT_THROW(cfg.validate(), ContractViolation);
  cfg.proportions = {};
  cfg.u = 11;
  EXPECT_THROW(cfg.validate(), ContractViolation);
  cfg.u = 1;
  cfg.n = 1;
  EXPECT_THROW(cfg.validate(), ContractViolation);
}
