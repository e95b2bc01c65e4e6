#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "json.hpp"

namespace fs = std::filesystem;

struct Run {
  int code = -1;
  std::string out;
};

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("nikolskii_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Run run(const std::string& args, const std::string& tag) {
  const auto dir = scratch("run_" + tag);
  const auto out = dir / "stdout.txt";
  const std::string cmd = std::string(NIKOLSKII_CLI) + " " + args + " > " + out.string() + " 2> " + (dir / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  return r;
}

TEST(Cli, WeylPrintsCsvAndPasses) {
  const auto r = run("weyl --manifold t1", "weyl");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "manifold,d,n,N,ratio");
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("weyl --manifold s3", "bad_manifold").code, 2);
  EXPECT_EQ(run("weyl --no-such-flag", "bad_flag").code, 2);
  EXPECT_EQ(run("", "no_sub").code, 2);
  EXPECT_EQ(run("moments --ns 4,8,16 --s 0.5 --trials 10", "bad_s").code, 2);
}

TEST(Cli, FailingVerdictExitsOne) {
  // Degrees 2..4 are too few to show the sqrt-log growth of (2, inf).
  const auto r = run("average --ns 2,3,4 --pairs 2:inf --trials 20", "fail");
  EXPECT_EQ(r.code, 1);
}

TEST(Cli, AverageRerunIsByteIdentical) {
  const std::string args = "average --manifold s2 --ns 4,8,16 --trials 50 --seed 9 --pairs 1:2,2:inf --format csv";
  const auto a = scratch("det_a");
  const auto b = scratch("det_b");
  const auto ra = run(args + " --out " + a.string(), "det_a_run");
  const auto rb = run(args + " --out " + b.string(), "det_b_run");
  EXPECT_EQ(ra.code, rb.code);
  for (const char* name : {"average.csv", "duality.csv"}) {
    ASSERT_TRUE(fs::exists(a / name)) << name;
    EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
  }
  EXPECT_TRUE(fs::exists(a / "average_report.json"));
}

TEST(Cli, ConfigFileMatchesFlags) {
  const auto dir = scratch("config");
  {
    std::ofstream cfg(dir / "run.ini");
    cfg << "manifold = t2\nns = 4,8,16\ntrials = 30\nseed = 5\npairs = 1:2\n";
  }
  const auto from_file = run("average --config " + (dir / "run.ini").string(), "config_file");
  const auto from_flags = run("average --manifold t2 --ns 4,8,16 --trials 30 --seed 5 --pairs 1:2", "config_flags");
  EXPECT_EQ(from_file.out, from_flags.out);
  EXPECT_FALSE(from_file.out.empty());
}

TEST(Cli, JsonFormat) {
  const auto r = run("christoffel --manifold s2 --ns 4,8,16 --points 5 --format json", "json");
  EXPECT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["kind"], "christoffel");
  EXPECT_EQ(j["rows"].size(), 3u);
  EXPECT_TRUE(j.contains("config_hash"));
}

TEST(Cli, PointsetCsv) {
  const auto r = run("pointset --manifold t1 --n 4 --eps 0.5", "pointset");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "theta1,weight");
}

TEST(Cli, EverySubcommandRuns) {
  EXPECT_EQ(run("kernel-asym --manifold t1 --ns 16,32,64,128", "kernel").code, 0);
  EXPECT_EQ(run("worst --manifold t1 --ns 8,16,32 --worst-pairs 2:inf,4:2", "worst").code, 0);
  EXPECT_EQ(run("smallball --manifold t1 --n 16 --trials 4000", "smallball").code, 0);
  const auto m = run("moments --manifold t1 --ns 16,32,64 --trials 200 --q 2 --s 2", "moments");
  EXPECT_EQ(m.out.substr(0, m.out.find('\n')), "manifold,d,n,p,q,trials,seed,value,stderr");
}
