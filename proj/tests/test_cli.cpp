// Drives the sser executable end to end.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include "support.hpp"

using namespace sser;
using namespace sser::testing;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("sser_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    catalog_ = (data_dir() / "table2_catalog.json").string();
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args) {
    const std::string cmd = std::string("\"") + SSER_CLI_PATH + "\" " + args + " > \"" +
                            (dir_ / "stdout.txt").string() + "\" 2> \"" +
                            (dir_ / "stderr.txt").string() + "\"";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }

  std::string path(const std::string& name) { return "\"" + (dir_ / name).string() + "\""; }

  fs::path dir_;
  std::string catalog_;
};

}  // namespace

TEST_F(Cli, CatalogValidate) {
  EXPECT_EQ(run("catalog validate \"" + catalog_ + "\""), 0);
  EXPECT_NE(slurp(dir_ / "stdout.txt").find("11 appliances, 24 virtual rows"), std::string::npos);
  std::ofstream(dir_ / "bad.json") << R"({"appliances": [{"name": "x", "standby_w": 9, "modes": [{"rated_w": 10, "deviation_w": 2}]}]})";
  EXPECT_EQ(run("catalog validate " + path("bad.json")), 2);
  EXPECT_NE(slurp(dir_ / "stderr.txt").find("'x'"), std::string::npos);
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("disaggregate --catalog \"" + catalog_ + "\""), 2);
  EXPECT_EQ(run("no-such-command"), 2);
}

TEST_F(Cli, FullPipeline) {
  ASSERT_EQ(run("simulate --catalog \"" + catalog_ + "\" --out " + path("sim") +
                " --duration 1500 --epochs 4 --seed 3"),
            0);
  for (const char* f : {"trace.csv", "truth_states.csv", "truth_power.csv", "scenario.json", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir_ / "sim" / f)) << f;
  }

  ASSERT_EQ(run("detect-epochs --trace " + path("sim/trace.csv") + " --catalog \"" + catalog_ + "\""), 0);
  EXPECT_EQ(slurp(dir_ / "stdout.txt").rfind("start_index,end_index,start_time,end_time,peak_w\n", 0), 0U);
  ASSERT_EQ(run("detect-epochs --trace " + path("sim/trace.csv") + " --baseline 31 --out " + path("epochs.csv")), 0);
  EXPECT_TRUE(fs::exists(dir_ / "epochs.csv.manifest.json"));

  ASSERT_EQ(run("disaggregate --trace " + path("sim/trace.csv") + " --catalog \"" + catalog_ +
                "\" --out " + path("res") + " --jobs 2"),
            0);
  for (const char* f : {"states.csv", "power.csv", "epochs.csv", "residual.csv", "diagnostics.json", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir_ / "res" / f)) << f;
  }
  std::ifstream mf(dir_ / "res" / "manifest.json");
  const json manifest = json::parse(mf);
  EXPECT_EQ(manifest["command"], "disaggregate");
  EXPECT_EQ(manifest["config"]["jobs"], 2);
  EXPECT_EQ(manifest["inputs"].size(), 2U);
  for (const auto& [name, entry] : manifest["inputs"].items()) {
    EXPECT_EQ(entry["sha256"].get<std::string>().size(), 64U) << name;
  }

  ASSERT_EQ(run("evaluate --catalog \"" + catalog_ + "\" --truth " + path("sim") + " --result " + path("res")), 0);
  std::ifstream rf(dir_ / "res" / "report.json");
  const json report = json::parse(rf);
  EXPECT_GT(report["spa"].get<double>(), 0.9);

  ASSERT_EQ(run("disaggregate --method lse --trace " + path("sim/trace.csv") + " --catalog \"" + catalog_ +
                "\" --out " + path("lse")),
            0);
  std::ifstream df(dir_ / "lse" / "diagnostics.json");
  EXPECT_EQ(json::parse(df)["method"], "lse");

  ASSERT_EQ(run("sweep --trace " + path("sim/trace.csv") + " --catalog \"" + catalog_ + "\" --truth " +
                path("sim") + " --out " + path("sweep") + " --rhos 0.9,1.0"),
            0);
  const std::string csv = slurp(dir_ / "sweep" / "sweep.csv");
  EXPECT_EQ(csv.rfind("rho,eda,spa,runtime_s\n0.9,", 0), 0U) << csv;
  EXPECT_TRUE(fs::exists(dir_ / "sweep" / "manifest.json"));
}

TEST_F(Cli, InfeasibleExitsThree) {
  std::ofstream(dir_ / "cat.json") << R"({"appliances": [{"name": "x", "standby_w": 0, "modes": [{"rated_w": 10, "deviation_w": 1}]}]})";
  std::ofstream(dir_ / "trace.csv") << "watts\n50\n50\n";
  EXPECT_EQ(run("disaggregate --trace " + path("trace.csv") + " --catalog " + path("cat.json") +
                " --out " + path("out") + " --slack strict"),
            3);
}

TEST_F(Cli, BudgetExceededExitsFour) {
  std::ofstream(dir_ / "trace.csv") << "watts\n31\n1500\n1500\n31\n";
  EXPECT_EQ(run("disaggregate --trace " + path("trace.csv") + " --catalog \"" + catalog_ +
                "\" --out " + path("out") + " --budget 10"),
            4);
}

TEST_F(Cli, ConfigFileAndEnvironment) {
  std::ofstream(dir_ / "trace.csv") << "watts\n31\n56\n56\n31\n";
  std::ofstream(dir_ / "run.json") << R"({"method": "sser", "slack": "strict", "budget": 100000})";
  ASSERT_EQ(run("disaggregate --trace " + path("trace.csv") + " --catalog \"" + catalog_ +
                "\" --out " + path("out") + " --config " + path("run.json")),
            0);
  std::ifstream mf(dir_ / "out" / "manifest.json");
  const json manifest = json::parse(mf);
  EXPECT_EQ(manifest["config"]["slack"], "strict");
  EXPECT_EQ(manifest["config"]["budget"], 100000);

  ::setenv(kJobsEnvVar, "3", 1);
  ASSERT_EQ(run("disaggregate --trace " + path("trace.csv") + " --catalog \"" + catalog_ +
                "\" --out " + path("env")),
            0);
  ::unsetenv(kJobsEnvVar);
  std::ifstream ef(dir_ / "env" / "manifest.json");
  EXPECT_EQ(json::parse(ef)["config"]["jobs"], 3);
}

TEST_F(Cli, GapsAreReported) {
  std::ofstream(dir_ / "trace.csv") << "timestamp,watts\n0,31\n6,31\n18,31\n";
  ASSERT_EQ(run("detect-epochs --trace " + path("trace.csv") + " --baseline 31"), 0);
  EXPECT_NE(slurp(dir_ / "stderr.txt").find("1 sample(s) missing after data row 2"), std::string::npos);
}
