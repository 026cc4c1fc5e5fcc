#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "ardiff/io.hpp"

namespace fs = std::filesystem;
using ardiff::io::json;

namespace {

const fs::path kScratch = fs::temp_directory_path() / "ardiff_cli_tests";

int run(const std::string& args) {
  const std::string cmd = std::string(ARDIFF_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string out(const std::string& name) { return (kScratch / name).string(); }

}  // namespace

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kScratch);
    fs::create_directories(kScratch);
  }
};

TEST_F(Cli, ScheduleGrid) {
  ASSERT_EQ(run("--out " + out("sched") + " schedule --T 2 --eta 0.5 --delta 0.25 --L 1"), 0);
  std::ifstream in(kScratch / "sched" / "schedule.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "r,t_r,eta_r,regime");
  std::vector<std::string> rows;
  while (std::getline(in, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 8u);
  EXPECT_EQ(rows.back().rfind("7,2,", 0), 0u);
  const auto bounds = ardiff::io::read_json_file(kScratch / "sched" / "bounds.json");
  EXPECT_FALSE(bounds.empty());
  const auto manifest = ardiff::io::read_json_file(kScratch / "sched" / "run.json");
  EXPECT_EQ(manifest.at("command"), "schedule");
}

TEST_F(Cli, CounterexampleReport) {
  ASSERT_EQ(run("--out " + out("ce") + " counterexample --eps 0.2 --M 5 --dx 1 --dy 1 --probe 1"), 0);
  const auto j = ardiff::io::read_json_file(kScratch / "ce" / "counterexample.json");
  EXPECT_LE(j.at("kl_joint").get<double>(), 0.4);
  EXPECT_EQ(j.at("cond_floor").get<double>(), 25.0);
}

TEST_F(Cli, SynthGenIsDeterministic) {
  ASSERT_EQ(run("--seed 4 --out " + out("g1") + " synth-gen --task 1 --n 12"), 0);
  ASSERT_EQ(run("--seed 4 --out " + out("g2") + " synth-gen --task 1 --n 12 --threads 3"), 0);
  EXPECT_EQ(slurp(kScratch / "g1" / "index.csv"), slurp(kScratch / "g2" / "index.csv"));
  for (int i = 0; i < 12; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "images/%05d.ppm", i);
    EXPECT_EQ(slurp(kScratch / "g1" / name), slurp(kScratch / "g2" / name)) << name;
  }
  ASSERT_EQ(run("--out " + out("ev") + " synth-eval --dir " + out("g1") + " --task 1"), 0);
  EXPECT_TRUE(fs::exists(kScratch / "ev" / "eval.json"));
}

TEST_F(Cli, ConfigReplayReproducesOutputs) {
  ASSERT_EQ(run("--seed 3 --out " + out("r1") + " schedule --T 3 --eta 0.1 --delta 0.1 --L 2"), 0);
  ASSERT_EQ(run("--config " + out("r1") + "/run.json --out " + out("r2")), 0);
  EXPECT_EQ(slurp(kScratch / "r1" / "schedule.csv"), slurp(kScratch / "r2" / "schedule.csv"));
  const auto a = ardiff::io::read_json_file(kScratch / "r1" / "run.json");
  const auto b = ardiff::io::read_json_file(kScratch / "r2" / "run.json");
  EXPECT_EQ(a.at("config_digest"), b.at("config_digest"));
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("--out " + out("bad") + " schedule --T 2 --eta 0.5 --delta 0.9 --L 1"), 2);
  EXPECT_EQ(run("--out " + out("bad") + " schedule --no-such-flag 1"), 2);
  EXPECT_EQ(run("--out " + out("bad") + " no-such-command"), 2);
  EXPECT_EQ(run("--version"), 0);
}
