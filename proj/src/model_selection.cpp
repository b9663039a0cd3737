#include "envmix/model_selection.hpp"

#include "envmix/parallel.hpp"

#include <cmath>
#include <limits>

namespace envmix {

long long free_param_count(int M, int u, int r, int p, bool count_pi) {
  if (M < 1) throw ContractViolation("M must be >= 1");
  if (u < 0 || u > r) throw ContractViolation("u must lie in 0..r");
  const long long m = M;
  const long long uu = u;
  const long long rr = r;
  const long long pp = p;
  long long count = m * rr + m * uu * pp + m * uu * (uu + 1) / 2 +
                    (rr - uu) * (rr - uu + 1) / 2 + uu * (rr - uu);
  if (count_pi) count += m - 1;
  return count;
}

double bic_score(double loglik, int M, int u, int r, int p, int n, bool count_pi) {
  if (n < 1) throw ContractViolation("n must be >= 1");
  return -2.0 * loglik +
         std::log(static_cast<double>(n)) * static_cast<double>(free_param_count(M, u, r, p, count_pi));
}

const SelectionCell& SelectionReport::best() const {
  for (const auto& cell : grid) {
    if (cell.ok && cell.M == best_M && cell.u == best_u) return cell;
  }
  throw Error("selection report has no successful cell");
}

void choose_best(SelectionReport& report) {
  const SelectionCell* best = nullptr;
  for (const auto& cell : report.grid) {
    if (!cell.ok) continue;
    if (!best || cell.bic < best->bic ||
        (cell.bic == best->bic && (cell.M < best->M || (cell.M == best->M && cell.u < best->u)))) {
      best = &cell;
    }
  }
  if (best) {
    report.best_M = best->M;
    report.best_u = best->u;
  } else {
    report.best_M = 0;
    report.best_u = 0;
  }
}

SelectionReport select_model(const Dataset& data, const std::vector<int>& M_grid,
                             const std::vector<int>& u_grid, const IccConfig& cfg,
                             const SelectionOptions& options) {
  if (M_grid.empty() || u_grid.empty()) throw ContractViolation("selection grids must be non-empty");
  SelectionReport report;
  report.n = data.n();
  for (int M : M_grid) {
    for (int u : u_grid) {
      SelectionCell cell;
      cell.M = M;
      cell.u = u;
      report.grid.push_back(cell);
    }
  }
  parallel_for(static_cast<int>(report.grid.size()), [&](int idx) {
    auto& cell = report.grid[static_cast<std::size_t>(idx)];
    IccConfig cell_cfg = cfg;
    cell_cfg.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(idx));
    try {
      auto fit = std::make_shared<FitResult>(run_icc(data, cell.M, cell.u, cell_cfg));
      cell.loglik = fit->loglik();
      cell.free_params = free_param_count(cell.M, cell.u, data.r(), data.p(), options.count_pi);
      cell.bic = bic_score(cell.loglik, cell.M, cell.u, data.r(), data.p(), data.n(), options.count_pi);
      cell.ok = std::isfinite(cell.bic);
      if (!cell.ok) cell.error = "non-finite log-likelihood";
      if (options.keep_fits) cell.fit = std::move(fit);
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
      cell.bic = std::numeric_limits<double>::quiet_NaN();
    }
  });
  choose_best(report);
  return report;
}

}  // namespace envmix
