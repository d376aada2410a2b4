#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::path(testing::TempDir()) / ("badr_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Outcome badr(const std::string& args, const std::string& env = "") {
  const auto dir = fs::path(testing::TempDir());
  const auto out = dir / "cli_stdout.txt", err = dir / "cli_stderr.txt";
  const std::string cmd =
      env + " \"" BADR_CLI "\" " + args + " >\"" + out.string() + "\" 2>\"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.out = slurp(out);
  o.err = slurp(err);
  return o;
}

std::string config(const std::string& name) { return std::string(BADR_CONFIGS) + "/" + name; }

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(badr("").code, 2);
  EXPECT_EQ(badr("fit").code, 2);
  EXPECT_EQ(badr("fit --config /nonexistent/config.json").code, 2);
  EXPECT_EQ(badr("--help").code, 0);

  const auto dir = scratch_dir("bad");
  std::ofstream(dir / "bad.json") << R"({"metric": {"name": "bogus"}})";
  const auto o = badr("fit --config " + (dir / "bad.json").string());
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("metric.name"), std::string::npos) << o.err;
  EXPECT_EQ(badr("check", "BADR_THREADS=zero").code, 0);  // check is single-threaded
  EXPECT_EQ(badr("scan --config " + config("toy_if.json") + " --out " + dir.string(), "BADR_THREADS=zero").code, 2);
}

TEST(Cli, FitWritesByteStableOutputs) {
  const auto a = scratch_dir("fit_a"), b = scratch_dir("fit_b");
  ASSERT_EQ(badr("fit --config " + config("toy_if.json") + " --out " + a.string()).code, 0);
  ASSERT_EQ(badr("fit --config " + config("toy_if.json") + " --out " + b.string()).code, 0);
  for (const char* f : {"report.json", "trajectory.csv", "weights.csv"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  const auto report = nlohmann::json::parse(slurp(a / "report.json"));
  EXPECT_EQ(report.at("command"), "fit");
  EXPECT_NE(slurp(a / "trajectory.csv").find("t,fairness"), std::string::npos);
}

TEST(Cli, SeedChangesTheSgdRun) {
  const auto a = scratch_dir("seed_a"), b = scratch_dir("seed_b");
  ASSERT_EQ(badr("fit --config " + config("toy_dm_sgd.json") + " --out " + a.string() + " --seed 1").code, 0);
  ASSERT_EQ(badr("fit --config " + config("toy_dm_sgd.json") + " --out " + b.string() + " --seed 2").code, 0);
  EXPECT_NE(slurp(a / "weights.csv"), slurp(b / "weights.csv"));
}

TEST(Cli, CompareReportsFiveStrategies) {
  const auto dir = scratch_dir("compare");
  const auto o = badr("compare --config " + config("toy_if.json") + " --out " + dir.string());
  ASSERT_EQ(o.code, 0) << o.err;
  const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
  const auto& rows = report.at("report").at("strategies");
  ASSERT_EQ(rows.size(), 5u);
  double badr_fair = 0.0, uniform_fair = 0.0;
  for (const auto& r : rows) {
    EXPECT_EQ(r.at("error"), "");
    if (r.at("name") == "badr-gd") badr_fair = r.at("train_fairness");
    if (r.at("name") == "uniform") uniform_fair = r.at("train_fairness");
  }
  EXPECT_LE(badr_fair, uniform_fair);
  EXPECT_TRUE(fs::exists(dir / "compare.csv"));

  std::ofstream(dir / "flat.json") << R"({"model": {"reg": 0.0}})";
  const auto flat = badr("compare --config " + (dir / "flat.json").string() + " --out " + dir.string());
  EXPECT_EQ(flat.code, 2);
  EXPECT_NE(flat.err.find("strong convexity"), std::string::npos) << flat.err;
}

TEST(Cli, ScanIsByteStableAcrossThreadCounts) {
  const auto a = scratch_dir("scan_a"), b = scratch_dir("scan_b");
  ASSERT_EQ(badr("scan --config " + config("toy_if.json") + " --out " + a.string(), "BADR_THREADS=1").code, 0);
  ASSERT_EQ(badr("scan --config " + config("toy_if.json") + " --out " + b.string(), "BADR_THREADS=4").code, 0);
  const std::string csv = slurp(a / "scan.csv");
  EXPECT_EQ(csv, slurp(b / "scan.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 102);
}

TEST(Cli, CheckPassesAndCorruptionFailsNamingTheMetric) {
  const auto ok = badr("check");
  EXPECT_EQ(ok.code, 0) << ok.out;
  EXPECT_NE(ok.out.find("PASS"), std::string::npos);
  const auto bad = badr("check", "BADR_CHECK_CORRUPT=dp");
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find("metric-gradient/dp"), std::string::npos) << bad.err;
}
