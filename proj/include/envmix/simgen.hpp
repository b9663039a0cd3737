#pragma once

#include "envmix/rng.hpp"
#include "envmix/types.hpp"

#include <cstdint>
#include <vector>

namespace envmix {

/// Synthetic mixture envelope scenario. Defaults give the two-cluster design:
/// r = 10 responses, p = 20 predictors, u = 1, proportions (0.4, 0.6); with
/// M = 3 the proportions default to uniform.
struct ScenarioConfig {
  int M = 2;
  int n = 300;
  int r = 10;
  int p = 20;
  int u = 1;
  std::vector<double> proportions;  // empty: defaults for M
  std::uint64_t seed = 0;

  std::vector<double> resolved_proportions() const;
  void validate() const;
};

struct SimDataset {
  Dataset data;
  MixtureParams truth;  // x_center is zero: mean = mu_k + beta_k x
  bool extended_u = false;  // u > 1 goes beyond the published design
};

/// Exact group sizes by largest remainder.
std::vector<int> group_sizes(const std::vector<double>& proportions, int n);

SimDataset generate_scenario(const ScenarioConfig& cfg, Rng& rng);
SimDataset generate_scenario(const ScenarioConfig& cfg);

}  // namespace envmix
