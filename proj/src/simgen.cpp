#include "envmix/simgen.hpp"

#include "envmix/linalg.hpp"
#include "envmix/model_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace envmix {

std::vector<double> ScenarioConfig::resolved_proportions() const {
  if (!proportions.empty()) return proportions;
  if (M == 2) return {0.4, 0.6};
  return std::vector<double>(static_cast<std::size_t>(M), 1.0 / M);
}

void ScenarioConfig::validate() const {
  if (M < 1) throw ContractViolation("M must be >= 1");
  if (n < M) throw ContractViolation("n must be at least M");
  if (r < 1 || p < 1) throw ContractViolation("r and p must be positive");
  if (u < 0 || u > r) throw ContractViolation("u must lie in 0..r");
  const auto props = resolved_proportions();
  if (static_cast<int>(props.size()) != M) throw ContractViolation("need one proportion per cluster");
  if (std::any_of(props.begin(), props.end(), [](double v) { return !(v > 0.0); })) {
    throw ContractViolation("proportions must be positive");
  }
  if (std::abs(std::accumulate(props.begin(), props.end(), 0.0) - 1.0) > 1e-9) {
    throw ContractViolation("proportions must sum to 1");
  }
}

std::vector<int> group_sizes(const std::vector<double>& proportions, int n) {
  std::vector<int> sizes(proportions.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  int assigned = 0;
  for (std::size_t k = 0; k < proportions.size(); ++k) {
    const double exact = proportions[k] * n;
    sizes[k] = static_cast<int>(std::floor(exact + 1e-9));
    assigned += sizes[k];
    remainders.emplace_back(exact - sizes[k], k);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t j = 0; assigned < n; ++j, ++assigned) ++sizes[remainders[j % remainders.size()].second];
  return sizes;
}

namespace {

Matrix chi_square_matrix(int rows, int cols, double dof, Rng& rng) {
  std::chi_squared_distribution<double> chi(dof);
  Matrix out(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) out(i, j) = chi(rng);
  }
  return out;
}

Matrix normal_matrix(int rows, int cols, double mean, double sd, Rng& rng) {
  std::normal_distribution<double> normal(mean, sd);
  Matrix out(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) out(i, j) = normal(rng);
  }
  return out;
}

bool well_conditioned(const Matrix& a) {
  if (a.rows() == 0) return true;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a);
  const auto& ev = eig.eigenvalues();
  return ev.minCoeff() > 1e-8 * ev.maxCoeff() && ev.minCoeff() > 0.0;
}

}  // namespace

SimDataset generate_scenario(const ScenarioConfig& cfg, Rng& rng) {
  cfg.validate();
  const int r = cfg.r;
  const int p = cfg.p;
  const int u = cfg.u;
  const int M = cfg.M;
  constexpr int kMaxRetries = 100;

  // (Gamma, Gamma0) from the eigenvectors of a random PD matrix.
  Matrix eigvecs;
  for (int attempt = 0;; ++attempt) {
    const Matrix w = normal_matrix(r, r, 0.0, 1.0, rng);
    const Matrix pd = w * w.transpose() + static_cast<double>(r) * Matrix::Identity(r, r);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(pd);
    if (eig.info() == Eigen::Success || attempt >= kMaxRetries) {
      eigvecs = eig.eigenvectors().rowwise().reverse();
      break;
    }
  }
  EnvelopeBasis basis(eigvecs.leftCols(u), eigvecs.rightCols(r - u));

  Matrix omega0;
  for (int attempt = 0;; ++attempt) {
    const Matrix a = normal_matrix(r - u, r - u, 1.0, 1.0, rng);
    omega0 = linalg::symmetrize(a * a.transpose());
    if (well_conditioned(omega0) || attempt >= kMaxRetries) break;
  }

  MixtureParams truth;
  truth.basis = basis;
  truth.Omega0 = omega0;
  const auto props = cfg.resolved_proportions();
  truth.pi = Eigen::Map<const Vector>(props.data(), M);
  for (int k = 0; k < M; ++k) {
    GroupParams g;
    g.mu = Vector::Constant(r, static_cast<double>(k + 1));
    g.eta = chi_square_matrix(u, p, static_cast<double>(k + 1), rng);
    g.Omega = Matrix::Zero(u, u);
    for (int j = 0; j < u; ++j) {
      std::chi_squared_distribution<double> chi(1.0);
      double value = chi(rng);
      for (int attempt = 0; value < 1e-8 && attempt < kMaxRetries; ++attempt) value = chi(rng);
      g.Omega(j, j) = value;
    }
    g.x_center = Vector::Zero(p);
    truth.groups.push_back(std::move(g));
  }

  const int n = cfg.n;
  const std::vector<int> sizes = group_sizes(props, n);
  LabelVector labels;
  labels.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < M; ++k) labels.insert(labels.end(), static_cast<std::size_t>(sizes[static_cast<std::size_t>(k)]), k + 1);
  std::shuffle(labels.begin(), labels.end(), rng);

  const Matrix x = normal_matrix(n, p, 1.0, 1.0, rng);
  Matrix y(n, r);
  std::vector<Matrix> chol;
  for (int k = 0; k < M; ++k) {
    const Matrix sigma = assemble_sigma(basis, truth.groups[static_cast<std::size_t>(k)].Omega, omega0);
    chol.push_back(Eigen::LLT<Matrix>(sigma).matrixL());
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(labels[static_cast<std::size_t>(i)] - 1);
    Vector z(r);
    for (int j = 0; j < r; ++j) z[j] = normal(rng);
    y.row(i) = (truth.groups[k].mean(basis, x.row(i).transpose()) + chol[k] * z).transpose();
  }

  SimDataset sim;
  sim.data = Dataset(x, y, labels);
  sim.truth = std::move(truth);
  sim.extended_u = u > 1;
  return sim;
}

SimDataset generate_scenario(const ScenarioConfig& cfg) {
  Rng rng(cfg.seed);
  return generate_scenario(cfg, rng);
}

}  // namespace envmix
