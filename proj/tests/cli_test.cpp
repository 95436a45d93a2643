#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>
#include <sys/wait.h>

#include "besqlab/cli.hpp"
#include "besqlab/errors.hpp"

namespace {

using namespace besqlab::cli;
namespace fs = std::filesystem;

struct Result {
  int status;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int status = main_entry(args, out, err);
  return {status, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("besqlab_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

TEST(Cli, DensityExample) {
  const Result r = invoke({"density", "--delta", "2", "--t", "0.5", "--x", "0", "--y", "1"});
  EXPECT_EQ(r.status, kOk);
  EXPECT_NEAR(std::stod(r.out), 0.36787944117144233, 1e-15);
}

TEST(Cli, RatioMarkovLimitEqualsDensity) {
  const Result ratio = invoke({"ratio", "--c", "1", "--delta1", "1", "--delta2", "1", "--z1", "1",
                               "--z2", "4", "--z3", "1", "--limit-eps"});
  const Result density = invoke({"density", "--delta", "2", "--t", "1", "--x", "4", "--y", "1"});
  ASSERT_EQ(ratio.status, kOk) << ratio.err;
  EXPECT_NEAR(std::stod(ratio.out) / std::stod(density.out), 1.0, 1e-8);
}

TEST(Cli, RatioRescalesLargeC) {
  // Z^c / c = X + Y / c: the conditional density of Z^2 at z3 given (z1, z2)
  // equals that of the rescaled process at (z1/c, z2/c, z3/c) divided by c.
  const Result big = invoke({"ratio", "--c", "2", "--delta1", "1", "--delta2", "3", "--eps", "0.5",
                             "--z1", "2", "--z2", "6", "--z3", "4", "--rel-tol", "1e-9"});
  const Result small = invoke({"ratio", "--c", "0.5", "--delta1", "3", "--delta2", "1", "--eps", "0.5",
                               "--z1", "1", "--z2", "3", "--z3", "2", "--rel-tol", "1e-9"});
  ASSERT_EQ(big.status, kOk) << big.err;
  EXPECT_NEAR(std::stod(big.out), 0.5 * std::stod(small.out), 1e-9);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(invoke({"simulate", "--delta", "2"}).status, kConfigError);
  EXPECT_EQ(invoke({"density", "--delta", "2", "--t", "1", "--x", "0"}).status, kConfigError);
  EXPECT_EQ(invoke({"density", "--delta", "-1", "--t", "1", "--x", "0", "--y", "1"}).status,
            kConfigError);
  EXPECT_EQ(invoke({"frobnicate"}).status, kConfigError);
  EXPECT_EQ(invoke({"density", "--delta", "abc", "--t", "1", "--x", "0", "--y", "1"}).status,
            kConfigError);
  EXPECT_EQ(invoke({"eigen", "--seed", "1", "--method", "sde", "--c", "0.5"}).status, kConfigError);
  // An empty conditioning window cannot be sampled.
  const Result empty = invoke({"markov-test", "--seed", "1", "--c-values", "1", "--w1-center",
                               "0.5,-4", "--w1-halfwidth", "0.5,0.01", "--eps", "0.5,0.5", "--n",
                               "100"});
  EXPECT_EQ(empty.status, kInconclusive) << empty.err;
  EXPECT_EQ(invoke({"--help"}).status, kOk);
  EXPECT_EQ(invoke({"--version"}).status, kOk);
}

TEST(Cli, ProcessExitStatus) {
  const std::string cmd = std::string(BESQLAB_CLI_PATH) + " simulate --delta 2 > /dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(raw));
  EXPECT_EQ(WEXITSTATUS(raw), kConfigError);
}

TEST(Cli, SeedRequirementFollowsCommand) {
  for (Command c : {Command::kSimulate, Command::kEigen, Command::kMarkovTest, Command::kCmxTest}) {
    EXPECT_TRUE(is_stochastic(c));
    RunConfig cfg;
    cfg.command = c;
    EXPECT_THROW(cfg.validate(), besqlab::ConfigError);
  }
  for (Command c : {Command::kDensity, Command::kRatio, Command::kLaplace, Command::kLemma3}) {
    EXPECT_FALSE(is_stochastic(c));
  }
}

TEST_F(TempDir, ConfigFileWithFlagOverride) {
  const fs::path cfg = dir_ / "density.json";
  std::ofstream(cfg) << R"({"delta": 2, "t": 0.5, "x": 0, "y": 3})";
  const Result from_file = invoke({"density", "--config", cfg.string()});
  ASSERT_EQ(from_file.status, kOk) << from_file.err;
  EXPECT_NEAR(std::stod(from_file.out), std::exp(-3.0), 1e-15);
  const Result overridden = invoke({"density", "--config", cfg.string(), "--y", "1"});
  EXPECT_NEAR(std::stod(overridden.out), std::exp(-1.0), 1e-15);

  std::ofstream(dir_ / "bad.json") << R"({"delta": 2, "t": 0.5, "x": 0, "y": 1, "colour": 3})";
  EXPECT_EQ(invoke({"density", "--config", (dir_ / "bad.json").string()}).status, kConfigError);
  std::ofstream(dir_ / "broken.json") << "{ not json";
  EXPECT_EQ(invoke({"density", "--config", (dir_ / "broken.json").string()}).status, kConfigError);
  EXPECT_EQ(invoke({"density", "--config", (dir_ / "missing.json").string()}).status, kConfigError);
}

TEST_F(TempDir, CsvOutputReparsesWithSidecar) {
  const fs::path out = dir_ / "paths.csv";
  const Result r = invoke({"simulate", "--delta", "3", "--steps", "10", "--paths", "4", "--seed", "9",
                           "--output", out.string()});
  ASSERT_EQ(r.status, kOk) << r.err;
  const auto rows = csv_rows(slurp(out));
  ASSERT_EQ(rows.size(), 1u + 4u * 11u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"path", "t", "value"}));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    ASSERT_EQ(rows[i].size(), 3u);
    EXPECT_GE(std::stod(rows[i][2]), 0.0);
  }
  const auto meta = nlohmann::json::parse(slurp(out.string() + ".meta.json"));
  EXPECT_EQ(meta.at("command"), "simulate");
  EXPECT_EQ(meta.at("seed"), 9);
  EXPECT_EQ(meta.at("exit_status"), 0);
  EXPECT_EQ(meta.at("config").at("delta"), 3.0);
  EXPECT_TRUE(meta.contains("version"));
  EXPECT_TRUE(meta.at("wall_time_seconds").is_number());
}

TEST_F(TempDir, JsonOutputReparses) {
  const fs::path out = dir_ / "eig.json";
  const Result r = invoke({"eigen", "--c", "0.5", "--delta", "2", "--steps", "5", "--paths", "2",
                           "--seed", "4", "--format", "json", "--output", out.string()});
  ASSERT_EQ(r.status, kOk) << r.err;
  const auto j = nlohmann::json::parse(slurp(out));
  ASSERT_TRUE(j.is_array());
  ASSERT_EQ(j.size(), 12u);
  for (const auto& row : j) EXPECT_GE(row.at("lambda1").get<double>(), row.at("lambda2").get<double>());
}

TEST_F(TempDir, ReproducibleBytes) {
  const fs::path cfg = dir_ / "sim.json";
  std::ofstream(cfg) << R"({"delta": 0.7, "x0": 1.5, "steps": 50, "paths": 3})";
  const fs::path a = dir_ / "a.csv";
  const fs::path b = dir_ / "b.csv";
  ASSERT_EQ(invoke({"simulate", "--config", cfg.string(), "--seed", "42", "--output", a.string()}).status, kOk);
  ASSERT_EQ(invoke({"simulate", "--config", cfg.string(), "--seed", "42", "--output", b.string()}).status, kOk);
  EXPECT_EQ(slurp(a), slurp(b));
  auto meta_a = nlohmann::json::parse(slurp(a.string() + ".meta.json"));
  auto meta_b = nlohmann::json::parse(slurp(b.string() + ".meta.json"));
  meta_a.erase("wall_time_seconds");
  meta_b.erase("wall_time_seconds");
  EXPECT_EQ(meta_a, meta_b);
  const fs::path c = dir_ / "c.csv";
  ASSERT_EQ(invoke({"simulate", "--config", cfg.string(), "--seed", "43", "--output", c.string()}).status, kOk);
  EXPECT_NE(slurp(a), slurp(c));
}

TEST_F(TempDir, RatioGridCsv) {
  const fs::path out = dir_ / "ratio.csv";
  const Result r = invoke({"ratio", "--c", "1", "--delta1", "1", "--delta2", "2", "--eps", "0.3,0.6",
                           "--z1", "1", "--z2", "2", "--z3", "1,2", "--output", out.string()});
  ASSERT_EQ(r.status, kOk) << r.err;
  const auto rows = csv_rows(slurp(out));
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0][0], "c");
  EXPECT_EQ(rows[0][7], "ratio");
  // Markov case: the ratio does not depend on eps.
  EXPECT_NEAR(std::stod(rows[1][7]), std::stod(rows[3][7]), 1e-9);
  EXPECT_NEAR(std::stod(rows[2][7]), std::stod(rows[4][7]), 1e-9);
}

}  // namespace
