#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pdmp/cli.hpp"

using namespace pdmp;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("pdmp_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write_config(const std::string& text) {
    const fs::path p = dir_ / "run.ini";
    std::ofstream(p) << text;
    return p.string();
  }

  int run(const std::string& command, const std::string& config_text,
          std::vector<std::string> extra = {}) {
    const std::string config = write_config(config_text);
    std::vector<std::string> args = {"pdmp-kit", command, "--config", config, "--out",
                                     (dir_ / "out").string()};
    args.insert(args.end(), extra.begin(), extra.end());
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    out_.str("");
    err_.str("");
    return cli::run_cli(static_cast<int>(argv.size()), argv.data(), out_, err_);
  }

  std::vector<std::vector<std::string>> read_csv(const std::string& name) {
    std::ifstream in(dir_ / "out" / name);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
      std::vector<std::string> cells;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
      rows.push_back(cells);
    }
    return rows;
  }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

const char* kBasicBps = R"([sampler]
sampler = bps
potential = gaussian_iso
dim = 2
lambda_c = 1.0

[engine]
t_end = 50
seed = 7
)";

}  // namespace

TEST(RunConfigParse, AcceptsKnownKeys) {
  const auto c = RunConfig::parse_string(
      "[sampler]\nsampler = bps\ndim = 3\nM = inf\n[engine]\nx0 = 1, 2, 3\nconstruction = c2\n"
      "[experiment]\n");
  EXPECT_EQ(c.get_string("sampler", "sampler"), "bps");
  EXPECT_EQ(c.get_int("sampler", "dim"), 3);
  EXPECT_TRUE(std::isinf(c.get_double("sampler", "M")));
  EXPECT_EQ(c.get_list("engine", "x0"), (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(c.get_double("sampler", "lambda_c", 2.5), 2.5);
}

TEST(RunConfigParse, RejectsUnknownKeysAndSections) {
  EXPECT_THROW(RunConfig::parse_string("[sampler]\nlambda = 1\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse_string("[samplers]\nsampler = bps\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse_string("stray = 1\n[sampler]\nsampler = bps\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse_string("[engine]\nt_end\n"), ConfigError);
}

TEST(RunConfigParse, RejectsMalformedValues) {
  const auto c = RunConfig::parse_string("[engine]\nt_end = ten\nmax_events = -3\n[sampler]\ndim = 2\n");
  EXPECT_THROW(c.get_double("engine", "t_end"), ConfigError);
  EXPECT_THROW(c.get_u64("engine", "max_events"), ConfigError);
  EXPECT_THROW(c.get_double("engine", "seed"), ConfigError);
}

TEST_F(CliTest, SimulateWritesTrajectory) {
  ASSERT_EQ(run("simulate", kBasicBps), cli::kOk) << err_.str();
  const auto rows = read_csv("trajectory.csv");
  ASSERT_GT(rows.size(), 3U);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"k", "time", "type", "phantom", "x_1", "x_2", "y_1", "y_2"}));
  double prev = -1.0;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    ASSERT_EQ(rows[k].size(), 8U);
    const double t = std::stod(rows[k][1]);
    EXPECT_GE(t, prev);
    prev = t;
  }
  EXPECT_NE(out_.str().find("status=completed"), std::string::npos) << out_.str();
}

TEST_F(CliTest, SimulateIsReproducibleAndSeedOverrides) {
  ASSERT_EQ(run("simulate", kBasicBps), cli::kOk);
  const auto a = read_csv("trajectory.csv");
  ASSERT_EQ(run("simulate", kBasicBps), cli::kOk);
  EXPECT_EQ(read_csv("trajectory.csv"), a);
  ASSERT_EQ(run("simulate", kBasicBps, {"--seed", "8"}), cli::kOk);
  EXPECT_NE(read_csv("trajectory.csv"), a);
}

TEST_F(CliTest, SimulateGrid) {
  const std::string cfg = std::string(kBasicBps) + "record = grid\ngrid_dt = 0.5\n";
  ASSERT_EQ(run("simulate", cfg), cli::kOk) << err_.str();
  const auto rows = read_csv("grid.csv");
  ASSERT_EQ(rows.size(), 102U);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"t", "x_1", "x_2", "y_1", "y_2"}));
  EXPECT_EQ(std::stod(rows[2][0]), 0.5);
}

TEST_F(CliTest, RateBoundViolationExitsThree) {
  ASSERT_EQ(run("simulate", R"([sampler]
sampler = bps
potential = gaussian_iso
dim = 1
variant = thinned
lambda_star = 0.5

[engine]
t_end = 20
x0 = 3
y0 = 1
)"),
            cli::kRateBound);
}

TEST_F(CliTest, EventCapExitsTwo) {
  ASSERT_EQ(run("simulate", R"([sampler]
sampler = bps
dim = 1
lambda_c = 100

[engine]
t_end = 10
max_events = 10
)"),
            cli::kExplosion);
}

TEST_F(CliTest, ConfigErrorsExitOne) {
  EXPECT_EQ(run("simulate", "[sampler]\nsampler = bps\nbogus = 1\n"), cli::kConfigError);
  EXPECT_EQ(run("simulate", "[sampler]\nsampler = hmc\n"), cli::kConfigError);
  EXPECT_EQ(run("couple", std::string(kBasicBps) + "[experiment]\nt_grid =\n"), cli::kConfigError);
  EXPECT_EQ(run("bias-sweep", std::string(kBasicBps) + "[experiment]\ncaps = 2, 1\n"),
            cli::kConfigError);
  EXPECT_EQ(run("simulate", kBasicBps, {"--threads", "0"}), cli::kConfigError);
  const std::vector<const char*> missing = {"pdmp-kit", "simulate"};
  EXPECT_EQ(cli::run_cli(2, missing.data(), out_, err_), cli::kConfigError);
  const std::vector<const char*> nofile = {"pdmp-kit", "simulate", "--config", "/nonexistent.ini"};
  EXPECT_EQ(cli::run_cli(4, nofile.data(), out_, err_), cli::kConfigError);
}

TEST_F(CliTest, WrongCandidateExitsFour) {
  const std::string cfg = R"([sampler]
sampler = bps
dim = 1

[experiment]
candidate_variance = 4
n_samples = 20000
)";
  EXPECT_EQ(run("check-invariance", cfg), cli::kStatisticalFailure);
  const auto rows = read_csv("invariance.csv");
  EXPECT_EQ(rows[0], (std::vector<std::string>{"function", "mean", "stderr", "z", "pass"}));
  EXPECT_EQ(rows.size(), 6U);
}

TEST_F(CliTest, CorrectCandidatePasses) {
  EXPECT_EQ(run("check-invariance", "[sampler]\nsampler = zigzag\ndim = 2\n"
                                    "[experiment]\nn_samples = 20000\n"),
            cli::kOk)
      << err_.str();
}

TEST_F(CliTest, CoupleWritesReport) {
  const std::string cfg = R"([sampler]
sampler = bps
dim = 1
variant = smoothed
eps = 0.2

[engine]
seed = 3

[experiment]
n_replicas = 2000
t_grid = 0.5, 1, 2
)";
  ASSERT_EQ(run("couple", cfg), cli::kOk) << err_.str() << out_.str();
  const auto rows = read_csv("couple.csv");
  ASSERT_EQ(rows.size(), 4U);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"t", "p_decouple", "stderr", "bound", "pass"}));
}

TEST_F(CliTest, EquivalenceAndBiasSweep) {
  const std::string eq = R"([sampler]
sampler = bps
dim = 1

[engine]
t_end = 2

[experiment]
n_replicas = 1000
)";
  EXPECT_EQ(run("equivalence", eq), cli::kOk) << out_.str();
  EXPECT_EQ(read_csv("equivalence.csv").size(), 9U);

  const std::string bias = R"([sampler]
sampler = bps
dim = 1

[engine]
t_end = 200

[experiment]
caps = 1, 2, inf
n_replicas = 4
test_functions = x2
)";
  run("bias-sweep", bias);
  const auto rows = read_csv("bias_sweep.csv");
  ASSERT_EQ(rows.size(), 4U);
  EXPECT_EQ(rows[3][0], "inf");
  EXPECT_EQ(std::stod(rows[3][4]), 0.0);
}

TEST_F(CliTest, BinaryExitCodes) {
  const std::string cfg = write_config(kBasicBps);
  const std::string base = std::string(PDMP_KIT_PATH) + " simulate --config " + cfg + " --out " +
                           (dir_ / "bin").string() + " > /dev/null 2>&1";
  EXPECT_EQ(WEXITSTATUS(std::system(base.c_str())), 0);
  EXPECT_TRUE(fs::exists(dir_ / "bin" / "trajectory.csv"));
  const std::string bad = write_config("[sampler]\nunknown = 1\n");
  const std::string cmd = std::string(PDMP_KIT_PATH) + " simulate --config " + bad + " > /dev/null 2>&1";
  EXPECT_EQ(WEXITSTATUS(std::system(cmd.c_str())), 1);
}
