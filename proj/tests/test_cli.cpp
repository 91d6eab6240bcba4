// End-to-end tests of the command-line tool; the binary path comes from the
// DUALSCOPE_BIN environment variable set by CTest.
#include <gtest/gtest.h>

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <algorithm>
#include <sstream>
#include <string>

#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;
};

std::string binary() {
  const char* bin = std::getenv("DUALSCOPE_BIN");
  EXPECT_NE(bin, nullptr) << "DUALSCOPE_BIN must point at the CLI binary";
  return bin ? bin : "";
}

RunResult run(const std::string& args, const std::string& env_prefix = "") {
  const std::string cmd = env_prefix + binary() + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  EXPECT_NE(pipe, nullptr);
  RunResult r;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) r.output.append(buf, n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  EXPECT_TRUE(in.good()) << p;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path work_dir() {
  const fs::path dir = fs::temp_directory_path() / "dualscope_cli_test";
  fs::create_directories(dir);
  return dir;
}

std::string model(const char* name) {
  return testutil::models_dir() + "/" + name;
}

}  // namespace

TEST(CliAnalyze, ExitCodesAndReport) {
  const RunResult obs = run("analyze " + model("m1.json"));
  EXPECT_EQ(obs.exit_code, 0);
  const auto j = nlohmann::json::parse(obs.output);
  EXPECT_TRUE(j["observable"].get<bool>());
  EXPECT_EQ(j["closure_dim"].get<int>(), 2);
  EXPECT_EQ(j["linear_dim"].get<int>(), 1);

  EXPECT_EQ(run("analyze " + model("m2.json")).exit_code, 10);

  const fs::path bad = work_dir() / "broken.json";
  std::ofstream(bad) << "{ not json";
  EXPECT_EQ(run("analyze " + bad.string()).exit_code, 2);
  EXPECT_EQ(run("analyze /nonexistent/model.json").exit_code, 2);
}

TEST(CliSimulate, DeterministicAcrossRunsAndThreads) {
  const fs::path dir = work_dir();
  const std::string base = "simulate " + model("m1.json") +
                           " --mu 1,0 --T 1 --dt 1e-3 --paths 10 --seed 7";
  const auto out = [&](const std::string& tag) {
    return (dir / ("sim_" + tag)).string();
  };
  EXPECT_EQ(run(base + " --threads 1 --out " + out("a")).exit_code, 0);
  EXPECT_EQ(run(base + " --threads 1 --out " + out("b")).exit_code, 0);
  EXPECT_EQ(run(base + " --threads 4 --out " + out("c")).exit_code, 0);
  const std::string a = slurp(out("a") + "_paths.csv");
  EXPECT_EQ(a, slurp(out("b") + "_paths.csv"));
  EXPECT_EQ(a, slurp(out("c") + "_paths.csv"));
  const std::string af = slurp(out("a") + "_filter.csv");
  EXPECT_EQ(af, slurp(out("b") + "_filter.csv"));
  EXPECT_EQ(af, slurp(out("c") + "_filter.csv"));
  EXPECT_FALSE(a.empty());
  EXPECT_NE(a.find("path_id,t,state,Z_1"), std::string::npos);
}

TEST(CliSimulate, ThreadCountFromEnvironmentGivesSameBytes) {
  const fs::path dir = work_dir();
  const std::string base = "simulate " + model("m2.json") +
                           " --mu 0.2,0.3,0.5 --T 0.5 --dt 1e-2 --paths 6 "
                           "--seed 21 --out ";
  const std::string flag_out = (dir / "env_a").string();
  const std::string env_out = (dir / "env_b").string();
  EXPECT_EQ(run(base + flag_out + " --threads 3").exit_code, 0);
  EXPECT_EQ(run(base + env_out, "DUALSCOPE_THREADS=2 ").exit_code, 0);
  EXPECT_EQ(slurp(flag_out + "_paths.csv"), slurp(env_out + "_paths.csv"));
  EXPECT_EQ(slurp(flag_out + "_filter.csv"), slurp(env_out + "_filter.csv"));
}

TEST(CliSimulate, RejectsBadConfig) {
  EXPECT_EQ(run("simulate " + model("m1.json") +
                " --mu 0.5,0.6 --paths 5")
                .exit_code,
            2);
  EXPECT_EQ(run("simulate " + model("m1.json") + " --mu 1,0 --paths 0")
                .exit_code,
            2);
}

TEST(CliDuality, IdentityHoldsAndUsageErrors) {
  const RunResult r = run("duality " + model("m1.json") +
                          " --pi0 1,0 --control const:1.0 --c 1 --T 1 "
                          "--dt 1e-2 --paths 2000 --seed 3");
  EXPECT_EQ(r.exit_code, 0);
  const auto j = nlohmann::json::parse(r.output);
  EXPECT_LE(j["residual"].get<double>(), 3.0 * j["std_err"].get<double>());
  EXPECT_NEAR(j["lhs"].get<double>(), 1.4323, 0.05);
  EXPECT_EQ(j["n_paths"].get<int>(), 2000);

  EXPECT_EQ(run("duality " + model("m1.json") + " --control const:1.0")
                .exit_code,
            2);
}

TEST(CliDistinguish, VerdictsAndMismatchExit) {
  const std::string budget = " --T 1 --dt 1e-3 --paths 20 --seed 5";
  const RunResult r2 = run("distinguish " + model("m2.json") +
                           " --mu 0.5,0.3,0.2 --nu 0.7,0.1,0.2" + budget);
  EXPECT_EQ(r2.exit_code, 0);
  EXPECT_EQ(nlohmann::json::parse(r2.output)["verdict"], "indistinguishable");

  const RunResult r1 = run("distinguish " + model("m1.json") +
                           " --mu 0.9,0.1 --nu 0.5,0.5" + budget);
  EXPECT_EQ(r1.exit_code, 0);
  EXPECT_EQ(nlohmann::json::parse(r1.output)["verdict"], "distinguishable");

  const RunResult forced = run("distinguish " + model("m1.json") +
                               " --mu 0.9,0.1 --nu 0.5,0.5 --eps-entropy 10 "
                               "--eps-sup 10" +
                               budget);
  EXPECT_EQ(forced.exit_code, 30);
  EXPECT_TRUE(nlohmann::json::parse(forced.output)["mismatch"].get<bool>());
}

TEST(CliDistinguish, WritesDiscrepancyTrace) {
  const fs::path trace = work_dir() / "trace.csv";
  const RunResult r = run("distinguish " + model("m1.json") +
                          " --mu 0.9,0.1 --nu 0.5,0.5 --T 0.5 --dt 1e-2 "
                          "--paths 10 --seed 9 --trace-csv " + trace.string());
  EXPECT_EQ(r.exit_code, 0);
  const std::string body = slurp(trace);
  EXPECT_EQ(body.rfind("t,channel_1", 0), 0u);
  EXPECT_EQ(std::count(body.begin(), body.end(), '\n'), 52);  // header + 51
}

TEST(CliSpan, RecoversRank) {
  const RunResult r = run("span " + model("m1.json") +
                          " --controls 8 --paths 1000 --T 0.5 --dt 2e-3 "
                          "--seed 11");
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(nlohmann::json::parse(r.output)["rank"].get<int>(), 2);
}

TEST(CliFeedbackControlFile, ParsesAndRuns) {
  const fs::path ctl = work_dir() / "control.json";
  std::ofstream(ctl) << R"({"kind":"feedback","theta":[[0.2],[1.0],[0.0]],"clip":5.0})";
  const RunResult r = run("duality " + model("m1.json") +
                          " --pi0 0.5,0.5 --control feedback:" + ctl.string() +
                          " --c 0 --T 0.5 --dt 1e-2 --paths 2000 --seed 13");
  EXPECT_EQ(r.exit_code, 0);
  const auto j = nlohmann::json::parse(r.output);
  EXPECT_LE(j["residual"].get<double>(), 5.0 * j["std_err"].get<double>());
}

TEST(CliHelp, ExitsCleanly) {
  EXPECT_EQ(run("--help").exit_code, 0);
  EXPECT_EQ(run("bogus-subcommand").exit_code, 2);
  EXPECT_EQ(run("").exit_code, 2);
}
