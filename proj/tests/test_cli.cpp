#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "gbkm/harness.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / "gbkm_cli_test";

int run(const std::string& args) {
  fs::create_directories(kDir);
  const std::string cmd = std::string(GBKM_BENCH_PATH) + " " + args + " >" + (kDir / "stdout").string() + " 2>" +
                          (kDir / "stderr").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace

TEST(Cli, SingleRunWritesCsvHistoryAndConstants) {
  const fs::path out = kDir / "r.csv", hist = kDir / "h.csv", cons = kDir / "c.json";
  ASSERT_EQ(run("--n 100 --repeats 1 --out " + out.string() + " --history " + hist.string() + " --constants " +
                cons.string()),
            0);
  const auto rows = gbkm::parse_results_csv(slurp(out));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].iterations, 23);
  EXPECT_TRUE(rows[0].converged);
  const std::string h = slurp(hist);
  EXPECT_EQ(std::count(h.begin(), h.end(), '\n'), 25);
  const auto j = nlohmann::json::parse(slurp(cons));
  EXPECT_EQ(j.at("estimate"), "empirical");
  EXPECT_EQ(j.at("iterations"), 23);
}

TEST(Cli, SweepToStdoutAsJson) {
  ASSERT_EQ(run("--method mrwnk,mrwnk-m --omega 0,0.5 --repeats 1 --format json"), 0);
  const auto rows = gbkm::parse_results_json(slurp(kDir / "stdout"));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_NE(slurp(kDir / "stderr").find("best omega=0.5 IT=23"), std::string::npos);
}

TEST(Cli, ConfigFileWithFlagOverride) {
  const fs::path cfg = kDir / "run.ini";
  {
    fs::create_directories(kDir);
    std::ofstream f(cfg);
    f << "problem=singular-broyden\nn=500\nmethod=mrwnk\nrho=0.2\nrepeats=1\n";
  }
  ASSERT_EQ(run("--config " + cfg.string()), 0);
  auto rows = gbkm::parse_results_csv(slurp(kDir / "stdout"));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].n, 500u);
  EXPECT_EQ(rows[0].iterations, 31);

  ASSERT_EQ(run("--config " + cfg.string() + " --n 100"), 0);
  rows = gbkm::parse_results_csv(slurp(kDir / "stdout"));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].n, 100u);
  EXPECT_EQ(rows[0].iterations, 48);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("--omega 1.5 --repeats 1"), 2);
  EXPECT_NE(slurp(kDir / "stderr").find("omega out of range"), std::string::npos);
  EXPECT_EQ(run("--method gbk"), 2);
  EXPECT_EQ(run("--no-such-flag"), 2);
  EXPECT_EQ(run("--n 1"), 2);
  EXPECT_EQ(run("--repeats 1 --out /nonexistent-dir/x/out.csv"), 3);
  EXPECT_EQ(run("--config /nonexistent-dir/run.ini"), 3);
  EXPECT_EQ(run("--method rbwnk,mrwnk --history " + (kDir / "h.csv").string()), 2);
}
