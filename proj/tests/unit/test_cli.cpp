#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("bola_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Result run(const std::string& args) const {
    const auto out = dir_ / "stdout.txt";
    const std::string cmd = std::string("\"") + BOLA_LAB_PATH + "\" " + args + " > \"" + out.string() + "\" 2> \"" +
                            (dir_ / "stderr.txt").string() + "\"";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read(out);
    return r;
  }

  static std::string read(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  fs::path sub(const std::string& name) const {
    fs::create_directories(dir_ / name);
    return dir_ / name;
  }

  fs::path dir_;
};

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_F(Cli, GenProfileWritesTraceFile) {
  const auto r = run("--profile 3 gen-profile --out -");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out,
            "# cyclic\nduration_s,bandwidth_kbps,latency_ms\n30,5000,13\n30,4000,18\n30,3000,28\n30,2000,58\n"
            "30,1500,200\n30,2000,58\n30,3000,28\n30,4000,18\n");
}

TEST_F(Cli, SimulateIsByteIdenticalAcrossRuns) {
  for (const char* name : {"a", "b"}) {
    const auto r = run("simulate --profile 2 --variant bola-o --minutes 3 --seed 9 --format both --out-dir \"" +
                       sub(name).string() + "\"");
    ASSERT_EQ(r.code, 0);
  }
  for (const char* file : {"simulate_log.csv", "simulate_report.csv", "simulate_report.json"}) {
    const auto a = read(dir_ / "a" / file);
    EXPECT_FALSE(a.empty()) << file;
    EXPECT_EQ(a, read(dir_ / "b" / file)) << file;
  }
  const auto report = read(dir_ / "a" / "simulate_report.csv");
  EXPECT_EQ(report.substr(0, report.find('\n')), "# bola-lab report v1 seed=9");
}

TEST_F(Cli, OutputDirectoryFromEnvironment) {
  const auto env_dir = sub("env");
  ASSERT_EQ(setenv("BOLA_OUT_DIR", env_dir.c_str(), 1), 0);
  const auto r = run("simulate --profile 1 --minutes 1 --name env_run");
  unsetenv("BOLA_OUT_DIR");
  ASSERT_EQ(r.code, 0);
  EXPECT_TRUE(fs::exists(env_dir / "env_run_report.csv"));
  EXPECT_TRUE(fs::exists(env_dir / "env_run_log.csv"));
}

TEST_F(Cli, SweepCoversTheGrid) {
  const auto r = run("sweep --minutes 2 --profiles 1 2 3 4 5 6 7 8 9 10 11 12 "
                     "--variants bola-basic bola-finite bola-o bola-u --out-dir \"" + dir_.string() + "\"");
  ASSERT_EQ(r.code, 0);
  const auto report = read(dir_ / "sweep_report.csv");
  EXPECT_EQ(count_lines(report), 2u + 48u);
  EXPECT_NE(report.find("profile-12,bola-u"), std::string::npos);
}

TEST_F(Cli, OracleAndCompareWriteReports) {
  ASSERT_EQ(run("oracle --profile 1 --minutes 1 --delta 0.25 --out-dir \"" + dir_.string() + "\"").code, 0);
  const auto oracle = read(dir_ / "oracle_oracle.csv");
  EXPECT_NE(oracle.find("r_star"), std::string::npos);
  EXPECT_NE(oracle.find("n,m,finish_s,buffer_s,rebuffer_s"), std::string::npos);

  ASSERT_EQ(run("compare --minutes 1 --delta 0.25 --profiles 1 2 --out-dir \"" + dir_.string() + "\"").code, 0);
  const auto report = read(dir_ / "compare_report.csv");
  EXPECT_EQ(count_lines(report), 2u + 4u);
  EXPECT_NE(report.find(",r_star,ratio"), std::string::npos);
}

TEST_F(Cli, GenManifestRoundTrips) {
  const auto path = (dir_ / "m.json").string();
  ASSERT_EQ(run("gen-manifest --chunks 12 --seed 4 --out \"" + path + "\"").code, 0);
  ASSERT_EQ(run("simulate --manifest \"" + path + "\" --profile 5 --out-dir \"" + dir_.string() + "\"").code, 0);
  const auto log = read(dir_ / "simulate_log.csv");
  EXPECT_NE(log.find("\n"), std::string::npos);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("simulate --bogus").code, 1);
  EXPECT_EQ(run("simulate --out-dir \"" + dir_.string() + "\"").code, 1);
  EXPECT_EQ(run("simulate --profile 13").code, 1);
  EXPECT_EQ(run("simulate --profile 1 --manifest /nonexistent.json").code, 2);

  const auto trace = dir_ / "bad.csv";
  std::ofstream(trace) << "10,1000\n10,oops\n";
  EXPECT_EQ(run("simulate --trace \"" + trace.string() + "\" --out-dir \"" + dir_.string() + "\"").code, 2);

  const auto short_trace = dir_ / "short.csv";
  std::ofstream(short_trace) << "5,1000,0\n";
  EXPECT_EQ(run("simulate --trace \"" + short_trace.string() + "\" --out-dir \"" + dir_.string() + "\"").code, 3);
}
