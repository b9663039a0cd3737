// envmix: simulate, fit, select and benchmark mixture envelope regressions.

#include "envmix/baselines.hpp"
#include "envmix/evaluation.hpp"
#include "envmix/icc.hpp"
#include "envmix/io.hpp"
#include "envmix/model_selection.hpp"
#include "envmix/parallel.hpp"
#include "envmix/simgen.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

#ifndef ENVMIX_VERSION
#define ENVMIX_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace envmix;
using io::Json;

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kData = 3, kNumeric = 4 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Shared option groups

struct IccOptions {
  int max_iter = 200;
  int burn_in = 50;
  double tol = 1e-4;
  int window = 10;
  int starts = 5;
  int chains = 3;
  std::string policy = "reassign";

  void add(CLI::App* cmd) {
    cmd->add_option("--max-iter", max_iter, "ICC iterations")->capture_default_str();
    cmd->add_option("--burn-in", burn_in, "iterations before convergence tracking")->capture_default_str();
    cmd->add_option("--tol", tol, "relative tolerance on the windowed log-likelihood")->capture_default_str();
    cmd->add_option("--window", window, "window length for the convergence check")->capture_default_str();
    cmd->add_option("--starts", starts, "Grassmann optimizer starts per CC-step")->capture_default_str();
    cmd->add_option("--chains", chains, "independent ICC chains")->capture_default_str();
    cmd->add_option("--policy", policy, "undersized cluster policy")
        ->check(CLI::IsMember({"reassign", "restart"}))
        ->capture_default_str();
  }

  IccConfig config(std::uint64_t seed) const {
    IccConfig cfg;
    cfg.max_iter = max_iter;
    cfg.burn_in = burn_in;
    cfg.loglik_tol = tol;
    cfg.window = window;
    cfg.n_starts = starts;
    cfg.n_chains = chains;
    cfg.seed = seed;
    cfg.empty_cluster_policy = policy == "restart" ? EmptyClusterPolicy::Restart : EmptyClusterPolicy::Reassign;
    return cfg;
  }

  Json json() const {
    return {{"max_iter", max_iter}, {"burn_in", burn_in}, {"tol", tol},     {"window", window},
            {"starts", starts},     {"chains", chains},   {"policy", policy}};
  }
};

struct MethodOptions {
  std::string method = "icc";
  int svd_components = 1;

  void add(CLI::App* cmd) {
    cmd->add_option("--method", method, "estimator")
        ->check(CLI::IsMember({"icc", "ols", "two-stage"}))
        ->capture_default_str();
    cmd->add_option("--svd-components", svd_components, "two-stage: leading SVD scores to cluster on")
        ->capture_default_str();
  }

  /// Envelope dimension actually fitted: OLS always uses u = r.
  int effective_u(int u, int r) const { return method == "ols" ? r : u; }

  Fitter fitter(int M, int u, const IccConfig& cfg) const {
    if (method == "ols") return ols_fitter(M, cfg);
    if (method == "two-stage") {
      TwoStageConfig ts;
      ts.svd_components = svd_components;
      return two_stage_fitter(M, u, ts, cfg);
    }
    return icc_fitter(M, u, cfg);
  }
};

PredictionRule parse_rule(const std::string& s) {
  if (s == "prior-mean") return PredictionRule::PriorMean;
  if (s == "max-pi") return PredictionRule::MaxPi;
  return PredictionRule::Posterior;
}

ErrorMetric parse_metric(const std::string& s) {
  return s == "squared" ? ErrorMetric::SquaredNorm : ErrorMetric::Norm;
}

io::RunManifest manifest(const std::string& command) {
  io::RunManifest m;
  m.command = command;
  m.version = ENVMIX_VERSION;
  m.timestamp = io::manifest_timestamp();
  return m;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError(dir + ": cannot create directory: " + ec.message());
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return std::nan("");
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

Json cv_json(const PredictionReport& rep) {
  return {{"mean_error", rep.mean_error}, {"sd_error", rep.sd_error},     {"folds", rep.folds},
          {"repeats", rep.repeats},       {"per_fold", rep.per_fold},     {"per_repeat", rep.per_repeat},
          {"failed_folds", rep.failed_folds}};
}

Json bootstrap_json(const BootstrapReport& rep) {
  Json per = Json::array();
  for (const auto& m : rep.per_element_sd) per.push_back(io::matrix_json(m));
  return {{"B", rep.B},
          {"failed", rep.failed},
          {"group_mean_sd", io::vector_json(rep.group_mean_sd)},
          {"per_element_sd", std::move(per)}};
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  int M = 2;
  int n = 300;
  int r = 10;
  int p = 20;
  int u = 1;
  std::vector<double> proportions;
  std::uint64_t seed = 0;
  std::string out = ".";
};

int cmd_simulate(const SimulateArgs& a) {
  ScenarioConfig sc;
  sc.M = a.M;
  sc.n = a.n;
  sc.r = a.r;
  sc.p = a.p;
  sc.u = a.u;
  sc.proportions = a.proportions;
  sc.seed = a.seed;
  const SimDataset sim = generate_scenario(sc);

  ensure_dir(a.out);
  const fs::path dir(a.out);
  io::write_matrix_csv((dir / "X.csv").string(), sim.data.X, "x");
  io::write_matrix_csv((dir / "Y.csv").string(), sim.data.Y, "y");
  io::write_labels_csv((dir / "labels.csv").string(), *sim.data.true_labels);

  io::RunManifest m = manifest("simulate");
  m.output = a.out;
  m.options = {{"M", a.M}, {"n", a.n}, {"r", a.r}, {"p", a.p}, {"u", a.u},
               {"proportions", sc.resolved_proportions()}, {"seed", a.seed}};
  std::vector<int> sizes(static_cast<std::size_t>(a.M), 0);
  for (int label : *sim.data.true_labels) ++sizes[static_cast<std::size_t>(label - 1)];
  Json doc;
  doc["manifest"] = m.to_json();
  doc["group_sizes"] = sizes;
  doc["extended_u"] = sim.extended_u;
  doc["theta"] = io::params_json(sim.truth);
  io::write_json((dir / "truth.json").string(), doc);
  std::cout << "wrote " << a.n << " observations to " << a.out << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  std::string x, y, out = "fit.json";
  int M = 2;
  int u = -1;
  std::uint64_t seed = 0;
  IccOptions icc;
  MethodOptions method;
};

FitResult run_method(const Dataset& data, int M, int u, const MethodOptions& method, const IccConfig& cfg) {
  return method.fitter(M, u, cfg)(data, cfg.seed);
}

int cmd_fit(const FitArgs& a) {
  const Dataset data = io::read_dataset(a.x, a.y);
  if (a.u < 0 && a.method.method != "ols") throw UsageError("--u is required for method " + a.method.method);
  const int u = a.method.effective_u(a.u, data.r());
  const IccConfig cfg = a.icc.config(a.seed);
  const FitResult fit = run_method(data, a.M, u, a.method, cfg);

  io::RunManifest m = manifest("fit");
  m.inputs = {{"x", a.x}, {"y", a.y}};
  m.output = a.out;
  m.options = {{"method", a.method.method}, {"M", a.M},  {"u", u},
               {"seed", a.seed},            {"icc", a.icc.json()}};
  if (a.method.method == "two-stage") m.options["svd_components"] = a.method.svd_components;
  Json doc;
  doc["manifest"] = m.to_json();
  doc["fit"] = io::fit_json(fit);
  io::write_json(a.out, doc);
  std::cout << "loglik " << fit.loglik() << (fit.converged ? " (converged)" : " (iteration limit)") << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// select

struct SelectArgs {
  std::string x, y, out = "selection.json", fits_dir;
  std::vector<int> M_grid{1, 2, 3};
  std::vector<int> u_grid;
  bool count_pi = false;
  std::uint64_t seed = 0;
  IccOptions icc;
};

int cmd_select(const SelectArgs& a) {
  const Dataset data = io::read_dataset(a.x, a.y);
  std::vector<int> u_grid = a.u_grid;
  if (u_grid.empty()) {
    u_grid.resize(static_cast<std::size_t>(data.r()) + 1);
    std::iota(u_grid.begin(), u_grid.end(), 0);
  }
  for (int u : u_grid) {
    if (u < 0 || u > data.r()) throw UsageError("u-grid entry " + std::to_string(u) + " outside 0..r");
  }
  for (int M : a.M_grid) {
    if (M < 1) throw UsageError("M-grid entries must be positive");
  }
  SelectionOptions opts;
  opts.count_pi = a.count_pi;
  opts.keep_fits = !a.fits_dir.empty();
  const SelectionReport report = select_model(data, a.M_grid, u_grid, a.icc.config(a.seed), opts);

  io::RunManifest m = manifest("select");
  m.inputs = {{"x", a.x}, {"y", a.y}};
  m.output = a.out;
  m.options = {{"M_grid", a.M_grid}, {"u_grid", u_grid},       {"count_pi", a.count_pi},
               {"seed", a.seed},     {"icc", a.icc.json()}};
  if (!a.fits_dir.empty()) {
    ensure_dir(a.fits_dir);
    m.options["fits_dir"] = a.fits_dir;
    for (const auto& cell : report.grid) {
      if (!cell.ok || !cell.fit) continue;
      Json doc;
      doc["manifest"] = m.to_json();
      doc["fit"] = io::fit_json(*cell.fit);
      const std::string name = "fit_M" + std::to_string(cell.M) + "_u" + std::to_string(cell.u) + ".json";
      io::write_json((fs::path(a.fits_dir) / name).string(), doc);
    }
  }
  Json doc;
  doc["manifest"] = m.to_json();
  doc["selection"] = io::selection_json(report);
  io::write_json(a.out, doc);
  if (report.best_M == 0) {
    std::cerr << "every cell of the grid failed to fit\n";
    return kNumeric;
  }
  std::cout << "selected M=" << report.best_M << " u=" << report.best_u << " (BIC " << report.best().bic << ")\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::string x, y, labels, out = "evaluate.json";
  int M = 2;
  int u = -1;
  int folds = 5;
  int repeats = 1;
  int B = 50;
  std::string rule = "posterior";
  std::string metric = "norm";
  std::uint64_t seed = 0;
  IccOptions icc;
  MethodOptions method;
};

int cmd_evaluate(const EvaluateArgs& a) {
  std::optional<std::string> labels_path;
  if (!a.labels.empty()) labels_path = a.labels;
  const Dataset data = io::read_dataset(a.x, a.y, labels_path);
  if (a.u < 0 && a.method.method != "ols") throw UsageError("--u is required for method " + a.method.method);
  const int u = a.method.effective_u(a.u, data.r());
  const IccConfig cfg = a.icc.config(a.seed);
  const Fitter fitter = a.method.fitter(a.M, u, cfg);

  Json result;
  const FitResult fit = fitter(data, a.seed);
  result["loglik"] = fit.loglik();
  result["converged"] = fit.converged;
  if (data.true_labels) {
    try {
      validate_labels(*data.true_labels, data.n(), a.M);
    } catch (const ContractViolation& e) {
      throw DataError(a.labels + ": " + e.what());
    }
    const ClusterScore score = fsr_nsr(fit.labels, *data.true_labels, a.M);
    result["fsr"] = score.fsr;
    result["nsr"] = score.nsr;
    result["permutation"] = score.permutation;
  }
  if (a.folds > 0) {
    CvOptions cv;
    cv.folds = a.folds;
    cv.repeats = a.repeats;
    cv.seed = derive_seed(a.seed, 0x6376);
    cv.rule = parse_rule(a.rule);
    cv.metric = parse_metric(a.metric);
    result["cv"] = cv_json(cv_prediction_error(data, fitter, cv));
  }
  if (a.B > 0) result["bootstrap"] = bootstrap_json(bootstrap_se(data, fitter, a.B, derive_seed(a.seed, 0x626f)));

  io::RunManifest m = manifest("evaluate");
  m.inputs = {{"x", a.x}, {"y", a.y}};
  if (labels_path) m.inputs["labels"] = a.labels;
  m.output = a.out;
  m.options = {{"method", a.method.method}, {"M", a.M},           {"u", u},          {"folds", a.folds},
               {"repeats", a.repeats},      {"B", a.B},           {"rule", a.rule},  {"metric", a.metric},
               {"seed", a.seed},            {"icc", a.icc.json()}};
  Json doc;
  doc["manifest"] = m.to_json();
  doc["evaluation"] = std::move(result);
  io::write_json(a.out, doc);
  std::cout << "wrote " << a.out << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
  std::vector<int> n_grid{300};
  std::vector<int> M_grid{2};
  std::vector<std::string> methods{"icc", "ols", "two-stage"};
  int replicates = 10;
  int u = 1;
  int folds = 5;
  int B = 50;
  std::string rule = "posterior";
  std::string metric = "norm";
  std::uint64_t seed = 0;
  std::string out = "bench";
  IccOptions icc;
  int svd_components = 1;
};

struct BenchJob {
  int n = 0, M = 0, replicate = 0;
  std::string method;
  double err = std::nan(""), fsr = std::nan(""), nsr = std::nan("");
  Vector group_sd;
  std::string error;
};

int cmd_bench(const BenchArgs& a) {
  std::vector<BenchJob> jobs;
  for (int n : a.n_grid)
    for (int M : a.M_grid)
      for (int rep = 0; rep < a.replicates; ++rep)
        for (const auto& method : a.methods) {
          BenchJob job;
          job.n = n;
          job.M = M;
          job.replicate = rep;
          job.method = method;
          jobs.push_back(std::move(job));
        }

  parallel_for(static_cast<int>(jobs.size()), [&](int idx) {
    BenchJob& job = jobs[static_cast<std::size_t>(idx)];
    // Every method sees the same replicate dataset.
    ScenarioConfig sc;
    sc.M = job.M;
    sc.n = job.n;
    sc.u = a.u;
    sc.seed = derive_seed(derive_seed(a.seed, static_cast<std::uint64_t>(job.n) * 64 + job.M),
                          static_cast<std::uint64_t>(job.replicate));
    try {
      const SimDataset sim = generate_scenario(sc);
      MethodOptions method;
      method.method = job.method;
      method.svd_components = a.svd_components;
      const int u = method.effective_u(a.u, sim.data.r());
      const IccConfig cfg = a.icc.config(derive_seed(sc.seed, 1));
      const Fitter fitter = method.fitter(job.M, u, cfg);
      const FitResult fit = fitter(sim.data, cfg.seed);
      const ClusterScore score = fsr_nsr(fit.labels, *sim.data.true_labels, job.M);
      job.fsr = score.fsr;
      job.nsr = score.nsr;
      if (a.folds > 0) {
        CvOptions cv;
        cv.folds = a.folds;
        cv.seed = derive_seed(sc.seed, 2);
        cv.rule = parse_rule(a.rule);
        cv.metric = parse_metric(a.metric);
        job.err = cv_prediction_error(sim.data, fitter, cv).mean_error;
      }
      if (a.B > 0) job.group_sd = bootstrap_se(sim.data, fitter, a.B, derive_seed(sc.seed, 3)).group_mean_sd;
    } catch (const Error& e) {
      job.error = e.what();
    }
  });

  ensure_dir(a.out);
  const fs::path dir(a.out);
  std::ofstream table(dir / "table.csv", std::ios::binary);
  std::ofstream curves(dir / "bootstrap_sd.csv", std::ios::binary);
  if (!table || !curves) throw DataError(a.out + ": cannot write bench outputs");
  table << "n,M,method,err_mean,err_sd,fsr_mean,fsr_sd,nsr_mean,nsr_sd,failed\n";
  curves << "n,M,method,group,mean_sd,replicates\n";
  Json rows = Json::array();
  for (int n : a.n_grid) {
    for (int M : a.M_grid) {
      for (const auto& method : a.methods) {
        std::vector<double> err, fsr, nsr;
        std::vector<std::vector<double>> sd(static_cast<std::size_t>(M));
        int failed = 0;
        for (const auto& job : jobs) {
          if (job.n != n || job.M != M || job.method != method) continue;
          if (!job.error.empty()) {
            ++failed;
            continue;
          }
          fsr.push_back(job.fsr);
          nsr.push_back(job.nsr);
          if (!std::isnan(job.err)) err.push_back(job.err);
          for (Eigen::Index k = 0; k < job.group_sd.size(); ++k) sd[static_cast<std::size_t>(k)].push_back(job.group_sd[k]);
        }
        const auto f = io::format_double;
        table << n << ',' << M << ',' << method << ',' << f(mean_of(err)) << ',' << f(sd_of(err)) << ','
              << f(mean_of(fsr)) << ',' << f(sd_of(fsr)) << ',' << f(mean_of(nsr)) << ',' << f(sd_of(nsr)) << ','
              << failed << '\n';
        for (int k = 0; k < M; ++k) {
          const auto& v = sd[static_cast<std::size_t>(k)];
          if (v.empty()) continue;
          curves << n << ',' << M << ',' << method << ',' << k + 1 << ',' << f(mean_of(v)) << ',' << v.size() << '\n';
        }
      }
    }
  }
  for (const auto& job : jobs) {
    Json row = {{"n", job.n}, {"M", job.M}, {"replicate", job.replicate}, {"method", job.method}};
    if (job.error.empty()) {
      row["err"] = job.err;
      row["fsr"] = job.fsr;
      row["nsr"] = job.nsr;
      row["group_mean_sd"] = io::vector_json(job.group_sd);
    } else {
      row["error"] = job.error;
    }
    rows.push_back(std::move(row));
  }
  io::RunManifest m = manifest("bench");
  m.output = a.out;
  m.options = {{"n_grid", a.n_grid}, {"M_grid", a.M_grid}, {"methods", a.methods}, {"replicates", a.replicates},
               {"u", a.u},           {"folds", a.folds},   {"B", a.B},             {"rule", a.rule},
               {"metric", a.metric}, {"seed", a.seed},     {"svd_components", a.svd_components},
               {"icc", a.icc.json()}};
  Json doc;
  doc["manifest"] = m.to_json();
  doc["replicates"] = std::move(rows);
  io::write_json((dir / "bench.json").string(), doc);
  std::cout << "wrote " << (dir / "table.csv").string() << " and " << (dir / "bootstrap_sd.csv").string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixture envelope regression via imputation and conditional consistency"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ENVMIX_VERSION);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "generate a synthetic scenario");
  simulate->add_option("--M", sim.M, "number of clusters")->capture_default_str();
  simulate->add_option("--n", sim.n, "observations")->capture_default_str();
  simulate->add_option("--r", sim.r, "responses")->capture_default_str();
  simulate->add_option("--p", sim.p, "predictors")->capture_default_str();
  simulate->add_option("--u", sim.u, "envelope dimension")->capture_default_str();
  simulate->add_option("--proportions", sim.proportions, "cluster proportions (default 0.4,0.6 for M=2, else uniform)")
      ->delimiter(',');
  simulate->add_option("--seed", sim.seed, "master seed")->capture_default_str();
  simulate->add_option("--out", sim.out, "output directory")->capture_default_str();

  FitArgs fit;
  auto* fitc = app.add_subcommand("fit", "fit a mixture envelope model");
  fitc->add_option("--x", fit.x, "predictor CSV")->required();
  fitc->add_option("--y", fit.y, "response CSV")->required();
  fitc->add_option("--M", fit.M, "number of clusters")->capture_default_str();
  fitc->add_option("--u", fit.u, "envelope dimension (ignored by ols)");
  fitc->add_option("--seed", fit.seed, "master seed")->capture_default_str();
  fitc->add_option("--out", fit.out, "output JSON")->capture_default_str();
  fit.icc.add(fitc);
  fit.method.add(fitc);

  SelectArgs sel;
  auto* select = app.add_subcommand("select", "choose (M, u) by BIC");
  select->add_option("--x", sel.x, "predictor CSV")->required();
  select->add_option("--y", sel.y, "response CSV")->required();
  select->add_option("--M-grid", sel.M_grid, "cluster counts to try")->delimiter(',')->capture_default_str();
  select->add_option("--u-grid", sel.u_grid, "envelope dimensions to try (default 0..r)")->delimiter(',');
  select->add_flag("--count-pi", sel.count_pi, "count the M-1 mixing proportions as free parameters");
  select->add_option("--seed", sel.seed, "master seed")->capture_default_str();
  select->add_option("--out", sel.out, "output JSON")->capture_default_str();
  select->add_option("--fits-dir", sel.fits_dir, "also write one fit JSON per grid cell here");
  sel.icc.add(select);

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "classification, CV and bootstrap metrics for one method");
  evaluate->add_option("--x", ev.x, "predictor CSV")->required();
  evaluate->add_option("--y", ev.y, "response CSV")->required();
  evaluate->add_option("--labels", ev.labels, "true labels CSV (enables fsr/nsr)");
  evaluate->add_option("--M", ev.M, "number of clusters")->capture_default_str();
  evaluate->add_option("--u", ev.u, "envelope dimension (ignored by ols)");
  evaluate->add_option("--folds", ev.folds, "CV folds (0 skips CV)")->capture_default_str();
  evaluate->add_option("--repeats", ev.repeats, "CV repeats")->capture_default_str();
  evaluate->add_option("--B", ev.B, "bootstrap resamples (0 skips)")->capture_default_str();
  evaluate->add_option("--rule", ev.rule, "prediction rule")
      ->check(CLI::IsMember({"posterior", "prior-mean", "max-pi"}))
      ->capture_default_str();
  evaluate->add_option("--metric", ev.metric, "per-observation error")
      ->check(CLI::IsMember({"norm", "squared"}))
      ->capture_default_str();
  evaluate->add_option("--seed", ev.seed, "master seed")->capture_default_str();
  evaluate->add_option("--out", ev.out, "output JSON")->capture_default_str();
  ev.icc.add(evaluate);
  ev.method.add(evaluate);

  BenchArgs bench;
  auto* benchc = app.add_subcommand("bench", "all methods over replicate synthetic datasets");
  benchc->add_option("--n-grid", bench.n_grid, "sample sizes")->delimiter(',')->capture_default_str();
  benchc->add_option("--M-grid", bench.M_grid, "cluster counts")->delimiter(',')->capture_default_str();
  benchc->add_option("--methods", bench.methods, "methods to run")
      ->delimiter(',')
      ->check(CLI::IsMember({"icc", "ols", "two-stage"}))
      ->capture_default_str();
  benchc->add_option("--replicates", bench.replicates, "datasets per (n, M)")->capture_default_str();
  benchc->add_option("--u", bench.u, "envelope dimension")->capture_default_str();
  benchc->add_option("--folds", bench.folds, "CV folds (0 skips CV)")->capture_default_str();
  benchc->add_option("--B", bench.B, "bootstrap resamples (0 skips)")->capture_default_str();
  benchc->add_option("--rule", bench.rule, "prediction rule")
      ->check(CLI::IsMember({"posterior", "prior-mean", "max-pi"}))
      ->capture_default_str();
  benchc->add_option("--metric", bench.metric, "per-observation error")
      ->check(CLI::IsMember({"norm", "squared"}))
      ->capture_default_str();
  benchc->add_option("--svd-components", bench.svd_components, "two-stage: SVD scores")->capture_default_str();
  benchc->add_option("--seed", bench.seed, "master seed")->capture_default_str();
  benchc->add_option("--out", bench.out, "output directory")->capture_default_str();
  bench.icc.add(benchc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim);
    if (*fitc) return cmd_fit(fit);
    if (*select) return cmd_select(sel);
    if (*evaluate) return cmd_evaluate(ev);
    if (*benchc) return cmd_bench(bench);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const ContractViolation& e) {
    std::cerr << "invalid arguments: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kUsage;
}
