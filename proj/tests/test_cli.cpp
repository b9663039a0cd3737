#include "envmix/icc.hpp"
#include "envmix/io.hpp"
#include "envmix/simgen.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace envmix;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("envmix_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    ::setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  /// Runs the CLI with `args`; returns its exit status.
  int run(const std::string& args) const {
    const std::string cmd = std::string(ENVMIX_CLI) + " " + args + " > " + path("stdout.txt") + " 2> " +
                            path("stderr.txt");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string slurp(const std::string& file) {
    std::ifstream in(file, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static io::Json load(const std::string& file) { return io::Json::parse(slurp(file)); }

  static constexpr const char* kQuickIcc = "--chains 1 --max-iter 20 --burn-in 5 --window 5 --starts 2";

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, SimulateWritesScenarioFiles) {
  ASSERT_EQ(run("simulate --M 2 --n 300 --seed 7 --out " + path("sim")), 0);
  const Matrix x = io::read_matrix_csv(path("sim/X.csv"), "x");
  const Matrix y = io::read_matrix_csv(path("sim/Y.csv"), "y");
  EXPECT_EQ(x.rows(), 300);
  EXPECT_EQ(x.cols(), 20);
  EXPECT_EQ(y.cols(), 10);
  const io::Json truth = load(path("sim/truth.json"));
  EXPECT_EQ(truth["group_sizes"], io::Json({120, 180}));
  EXPECT_EQ(truth["manifest"]["command"], "simulate");
  EXPECT_EQ(truth["manifest"]["timestamp"], "2023-11-14T22:13:20Z");

  // Same data as the library generator with the same seed.
  ScenarioConfig sc;
  sc.seed = 7;
  const SimDataset sim = generate_scenario(sc);
  EXPECT_EQ(x, sim.data.X);
  EXPECT_EQ(y, sim.data.Y);
  EXPECT_EQ(io::read_labels_csv(path("sim/labels.csv")), *sim.data.true_labels);

  ASSERT_EQ(run("simulate --M 3 --n 300 --out " + path("sim3")), 0);
  EXPECT_EQ(load(path("sim3/truth.json"))["group_sizes"], io::Json({100, 100, 100}));
}

TEST_F(CliTest, SimulateIsByteIdentical) {
  ASSERT_EQ(run("simulate --seed 9 --n 100 --out " + path("a")), 0);
  const std::string x = slurp(path("a/X.csv")), y = slurp(path("a/Y.csv")), t = slurp(path("a/truth.json"));
  ASSERT_EQ(run("simulate --seed 9 --n 100 --out " + path("a")), 0);
  EXPECT_EQ(slurp(path("a/X.csv")), x);
  EXPECT_EQ(slurp(path("a/Y.csv")), y);
  EXPECT_EQ(slurp(path("a/truth.json")), t);
}

TEST_F(CliTest, FitThroughFilesMatchesInMemoryFit) {
  ASSERT_EQ(run("simulate --seed 11 --n 200 --r 4 --p 2 --out " + path("sim")), 0);
  const std::string fit_args = "fit --x " + path("sim/X.csv") + " --y " + path("sim/Y.csv") +
                               " --M 2 --u 1 --seed 5 " + kQuickIcc + " --out " + path("fit.json");
  ASSERT_EQ(run(fit_args), 0) << slurp(path("stderr.txt"));
  const io::Json doc = load(path("fit.json"));

  ScenarioConfig sc;
  sc.seed = 11;
  sc.n = 200;
  sc.r = 4;
  sc.p = 2;
  IccConfig cfg;
  cfg.n_chains = 1;
  cfg.max_iter = 20;
  cfg.burn_in = 5;
  cfg.window = 5;
  cfg.n_starts = 2;
  cfg.seed = 5;
  const FitResult fit = run_icc(generate_scenario(sc).data, 2, 1, cfg);
  const double ll = doc["fit"]["loglik"];
  EXPECT_NEAR(ll, fit.loglik(), 1e-12 * std::abs(ll));
  const io::Json expected_theta = io::params_json(fit.theta);
  for (int k = 0; k < 2; ++k) {
    const auto& got = doc["fit"]["theta"]["groups"][static_cast<std::size_t>(k)]["beta"];
    const auto& want = expected_theta["groups"][static_cast<std::size_t>(k)]["beta"];
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(got[i][j].get<double>(), want[i][j].get<double>(), 1e-12);
  }
  EXPECT_EQ(doc["manifest"]["options"]["u"], 1);

  // Re-running the manifest reproduces the output bit for bit.
  const std::string first = slurp(path("fit.json"));
  ASSERT_EQ(run(fit_args), 0);
  EXPECT_EQ(slurp(path("fit.json")), first);
}

TEST_F(CliTest, BaselineMethods) {
  ASSERT_EQ(run("simulate --seed 12 --n 150 --r 3 --p 1 --out " + path("sim")), 0);
  const std::string data = " --x " + path("sim/X.csv") + " --y " + path("sim/Y.csv") + " --M 2 ";
  ASSERT_EQ(run("fit" + data + "--method ols " + kQuickIcc + " --out " + path("ols.json")), 0);
  EXPECT_EQ(load(path("ols.json"))["fit"]["theta"]["u"], 3);
  ASSERT_EQ(run("fit" + data + "--u 1 --method two-stage --out " + path("ts.json")), 0);
  EXPECT_EQ(load(path("ts.json"))["manifest"]["options"]["svd_components"], 1);
}

TEST_F(CliTest, SelectReportsWideResponseGrid) {
  // r = 14, p = 13.
  ASSERT_EQ(run("simulate --seed 13 --n 200 --r 14 --p 13 --out " + path("wide")), 0);
  ASSERT_EQ(run("select --x " + path("wide/X.csv") + " --y " + path("wide/Y.csv") +
                " --M-grid 1,2 --u-grid 0,1,14 " + kQuickIcc + " --out " + path("sel.json")),
            0)
      << slurp(path("stderr.txt"));
  const io::Json doc = load(path("sel.json"));
  const auto& sel = doc["selection"];
  EXPECT_EQ(sel["n"], 200);
  ASSERT_EQ(sel["grid"].size(), 6u);
  for (const auto& cell : sel["grid"]) {
    EXPECT_TRUE(cell["ok"].get<bool>());
    EXPECT_TRUE(cell["bic"].is_number());
  }
  EXPECT_TRUE(sel["best"]["M"].is_number_integer());
  EXPECT_EQ(doc["manifest"]["options"]["u_grid"], io::Json({0, 1, 14}));
}

TEST_F(CliTest, EvaluateReportsAllMetrics) {
  ASSERT_EQ(run("simulate --seed 14 --n 150 --r 3 --p 1 --out " + path("sim")), 0);
  ASSERT_EQ(run("evaluate --x " + path("sim/X.csv") + " --y " + path("sim/Y.csv") + " --labels " +
                path("sim/labels.csv") + " --M 2 --u 1 --folds 3 --B 4 " + kQuickIcc + " --out " +
                path("ev.json")),
            0)
      << slurp(path("stderr.txt"));
  const io::Json ev = load(path("ev.json"))["evaluation"];
  EXPECT_TRUE(ev["fsr"].is_number());
  EXPECT_TRUE(ev["nsr"].is_number());
  EXPECT_EQ(ev["cv"]["folds"], 3);
  EXPECT_EQ(ev["bootstrap"]["B"], 4);
  EXPECT_EQ(ev["bootstrap"]["group_mean_sd"].size(), 2u);
}

TEST_F(CliTest, BenchIsDeterministic) {
  const std::string args = "bench --n-grid 300 --M-grid 2 --replicates 2 --folds 5 --B 2 " +
                           std::string(kQuickIcc) + " --seed 3 --out " + path("bench");
  ASSERT_EQ(run(args), 0) << slurp(path("stderr.txt"));
  const std::string table = slurp(path("bench/table.csv"));
  const std::string curves = slurp(path("bench/bootstrap_sd.csv"));
  EXPECT_EQ(table.substr(0, table.find('\n')), "n,M,method,err_mean,err_sd,fsr_mean,fsr_sd,nsr_mean,nsr_sd,failed");
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 4);
  EXPECT_EQ(std::count(curves.begin(), curves.end(), '\n'), 7);
  ASSERT_EQ(run(args), 0);
  EXPECT_EQ(slurp(path("bench/table.csv")), table);
  EXPECT_EQ(slurp(path("bench/bootstrap_sd.csv")), curves);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("fit --x a.csv"), 2);
  EXPECT_EQ(run("simulate --M 2 --proportions 0.5,0.6 --out " + path("s")), 2);
  ASSERT_EQ(run("simulate --n 60 --r 3 --p 1 --out " + path("sim")), 0);
  const std::string data = " --x " + path("sim/X.csv") + " --y " + path("sim/Y.csv");
  EXPECT_EQ(run("fit" + data + " --M 2"), 2);  // --u missing
  EXPECT_EQ(run("fit --x " + path("missing.csv") + " --y " + path("sim/Y.csv") + " --u 1"), 3);
  std::ofstream(path("bad.csv")) << "x1,x2\n1,oops\n";
  EXPECT_EQ(run("fit --x " + path("bad.csv") + " --y " + path("sim/Y.csv") + " --u 1"), 3);
  EXPECT_NE(slurp(path("stderr.txt")).find("bad.csv:2:2"), std::string::npos);
  // Twenty clusters cannot fit in 60 rows.
  EXPECT_EQ(run("select" + data + " --M-grid 20 --u-grid 1 " + kQuickIcc + " --out " + path("sel.json")), 4);
}
