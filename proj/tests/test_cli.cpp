#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"

namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("raccredit_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args, const std::string& out_subdir = "") {
    const auto out = out_subdir.empty() ? dir_ : dir_ / out_subdir;
    const std::string cmd = std::string(CLI_PATH) + " " + args + " --out " + out.string() + " 2>" +
                            (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string read(const std::string& name) const {
    std::ifstream in(dir_ / name);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static std::string sys(const std::string& name) { return "--system " + fixtures::path(name); }

  static std::vector<std::vector<std::string>> rows(const std::string& csv) {
    std::vector<std::vector<std::string>> out;
    std::istringstream in(csv);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::vector<std::string> cells;
      std::string cell;
      std::istringstream ls(line);
      while (std::getline(ls, cell, ',')) cells.push_back(cell);
      if (!line.empty() && line.back() == ',') cells.emplace_back();
      out.push_back(cells);
    }
    return out;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, AssessWritesCommentHeaderAndRows) {
  ASSERT_EQ(run("assess " + sys("toy3.json") + " --samples 20000 --seed 7"), 0);
  const auto csv = read("assess.csv");
  EXPECT_EQ(csv.rfind("# seed=7 engine=raccredit 1.0.0", 0), 0u);
  const auto r = rows(csv);
  ASSERT_EQ(r.size(), 4u);
  EXPECT_EQ(r[0][0], "metric");
  EXPECT_EQ(r[1][0], "eue");
  EXPECT_LT(std::abs(std::stod(r[1][2]) - 132.246), 4.0 * std::stod(r[1][3]));
}

TEST_F(Cli, AssessAdequateSystemHasUndefinedRse) {
  ASSERT_EQ(run("assess " + sys("adequate.json") + " --samples 100"), 0);
  for (const auto& row : rows(read("assess.csv"))) {
    if (row[0] == "metric") continue;
    EXPECT_EQ(row[2], "0");
    EXPECT_EQ(row[4], "undefined");
  }
}

TEST_F(Cli, AssessIsRepeatable) {
  ASSERT_EQ(run("assess " + sys("toy3.json") + " --samples 5000 --seed 3 --threads 1", "a"), 0);
  ASSERT_EQ(run("assess " + sys("toy3.json") + " --samples 5000 --seed 3 --threads 4", "b"), 0);
  EXPECT_EQ(read("a/assess.csv"), read("b/assess.csv"));
}

TEST_F(Cli, AccreditAllMethodsOnCandidate) {
  ASSERT_EQ(run("accredit " + sys("toy3.json") +
                " --exact --resources cand,firm --methods mri_ipa,mri_fd,elcc_bisection,elcc_secant,elcc_newton_ipa"
                " --delta 0.5 --delta-x 10 --tolerance-mw 0.01 --trace"),
            0);
  const auto r = rows(read("accredit.csv"));
  ASSERT_EQ(r.size(), 11u);
  EXPECT_EQ(r[0], (std::vector<std::string>{"resource_id", "method", "alpha", "l_c_mw", "delta_x_mw", "iterations",
                                            "simulation_runs", "stderr", "wall_time_s", "flags"}));
  for (std::size_t k = 1; k < r.size(); ++k) {
    const double expected = r[k][0] == "cand" ? 0.9 : 1.0;
    EXPECT_NEAR(std::stod(r[k][2]), expected, 0.001) << r[k][0] << " " << r[k][1];
  }
  EXPECT_FALSE(read("accredit_trace.csv").empty());
}

TEST_F(Cli, MriIpaRunsSumToOne) {
  ASSERT_EQ(run("accredit " + sys("toy3.json") + " --samples 20000 --methods mri_ipa --resources g100,g50a,g50b,cand,firm"),
            0);
  std::size_t runs = 0;
  for (const auto& row : rows(read("accredit.csv")))
    if (row[1] == "mri_ipa") runs += std::stoul(row[6]);
  EXPECT_EQ(runs, 1u);
}

TEST_F(Cli, SweepStepFlatUntilBreakpoint) {
  ASSERT_EQ(run("sweep-step " + sys("toy3.json") +
                " --exact --resources cand --deltas 0.1,0.5,2,5,20,45,60 --methods mri_fd,elcc_secant --tolerance-mw 1e-6"),
            0);
  const auto r = rows(read("sweep_step.csv"));
  ASSERT_EQ(r.size(), 15u);
  for (std::size_t k = 1; k < r.size(); ++k) {
    const double alpha = std::stod(r[k][3]);
    if (std::stod(r[k][1]) < 49.0 || r[k][2] == "mri_fd") EXPECT_NEAR(alpha, 0.9, 1e-9) << k;
    else EXPECT_GT(std::abs(alpha - 0.9), 1e-3) << k;
  }
}

TEST_F(Cli, SweepLoadFlagsAdequateRow) {
  ASSERT_EQ(run("sweep-load " + sys("adequate.json") + " --exact --resources cand --multipliers 1,2 --delta 0.5"), 0);
  const auto r = rows(read("sweep_load.csv"));
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[1].back(), "adequate");
  EXPECT_EQ(r[2].back(), "");
}

TEST_F(Cli, EmptySweepListIsConfigError) {
  EXPECT_EQ(run("sweep-step " + sys("toy3.json") + " --resources cand --samples 100"), 2);
  EXPECT_EQ(run("sweep-load " + sys("toy3.json") + " --resources cand --samples 100"), 2);
}

TEST_F(Cli, OracleCheckPassesOnToy) {
  EXPECT_EQ(run("oracle-check " + sys("toy3.json") + " --samples 50000 --seed 11"), 0);
  EXPECT_NE(read("oracle_check.csv").find("# overall,PASS"), std::string::npos);
}

TEST_F(Cli, OracleCheckUnsupportedAndKink) {
  EXPECT_EQ(run("oracle-check " + sys("synergy.json")), 2);
  EXPECT_NE(read("stderr.txt").find("oracle unsupported"), std::string::npos);
  EXPECT_EQ(run("oracle-check " + sys("kink.json")), 1);
  EXPECT_NE(read("stderr.txt").find("irregular baseline"), std::string::npos);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("assess --system /nonexistent.json"), 2);
  EXPECT_EQ(run("assess " + sys("toy3.json") + " --metric bogus --samples 10"), 2);
  EXPECT_EQ(run("accredit " + sys("toy3.json") + " --metric bogus --samples 10"), 2);
  EXPECT_EQ(run("assess " + sys("toy3.json") + " --samples 0"), 2);
  EXPECT_EQ(run("assess " + sys("toy3.json") + " --risk cvar:2"), 2);
  EXPECT_EQ(run("nonsense"), 2);
  EXPECT_EQ(run("accredit " + sys("adequate.json") + " --samples 100 --resources cand --methods mri_fd"), 1);
}

TEST_F(Cli, EnvironmentSetsDefaultOutputDirectory) {
  const auto target = dir_ / "from_env";
  const std::string cmd = "RACCREDIT_OUT_DIR=" + target.string() + " " + CLI_PATH + " assess " + sys("toy3.json") +
                          " --samples 100 2>/dev/null";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(target / "assess.csv"));
}

TEST_F(Cli, TomlConfigSuppliesSubcommandOptions) {
  {
    std::ofstream cfg(dir_ / "study.toml");
    cfg << "[assess]\nsamples = 2000\nseed = 5\n";
  }
  const std::string cmd = std::string(CLI_PATH) + " --config " + (dir_ / "study.toml").string() + " assess " +
                          sys("toy3.json") + " --out " + dir_.string() + " 2>/dev/null";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_EQ(read("assess.csv").rfind("# seed=5 engine=raccredit 1.0.0 samples=2000", 0), 0u);
}
