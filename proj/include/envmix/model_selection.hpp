#pragma once

#include "envmix/icc.hpp"
#include "envmix/types.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace envmix {

/// Free parameters of the mixture envelope model:
/// M r + M u p + M u(u+1)/2 + (r-u)(r-u+1)/2 + u(r-u),
/// plus M - 1 mixing proportions when `count_pi` is set.
long long free_param_count(int M, int u, int r, int p, bool count_pi = false);

/// -2 loglik + log(n) N(M, u).
double bic_score(double loglik, int M, int u, int r, int p, int n, bool count_pi = false);

struct SelectionCell {
  int M = 0;
  int u = 0;
  double bic = 0.0;
  double loglik = 0.0;
  long long free_params = 0;
  bool ok = false;
  std::string error;  // set when the fit failed
  std::shared_ptr<const FitResult> fit;
};

struct SelectionReport {
  std::vector<SelectionCell> grid;  // row-major over (M_grid, u_grid)
  int best_M = 0;
  int best_u = 0;
  int n = 0;

  const SelectionCell& best() const;
};

struct SelectionOptions {
  bool count_pi = false;
  bool keep_fits = true;
};

/// Minimum BIC over the successful cells, ties to smaller M then smaller u.
void choose_best(SelectionReport& report);

/// One run_icc per (M, u) cell, each with its own seed derived from cfg.seed.
SelectionReport select_model(const Dataset& data, const std::vector<int>& M_grid,
                             const std::vector<int>& u_grid, const IccConfig& cfg,
                             const SelectionOptions& options = {});

}  // namespace envmix
