#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <sys/wait.h>

#include "tdoaloc/io.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

// Runs the CLI through the shell; stderr is discarded unless redirected.
Run cli(const std::string& args, const std::string& env = "TDOALOC_GEOMETRY=") {
  const std::string cmd = env + " " + TDOALOC_CLI_PATH + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::random_device rd;
    dir_ = fs::temp_directory_path() / ("tdoaloc_cli_" + std::to_string(rd()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, HelpExitsZero) { EXPECT_EQ(cli("--help").code, 0); }

TEST_F(CliTest, SimulateRendersEightChannels) {
  ASSERT_EQ(cli("simulate --source 3,0,0 --duration 0.2 -o " + path("a.wav")).code, 0);
  const auto audio = tdoaloc::read_multichannel_wav(path("a.wav"));
  EXPECT_EQ(audio.channels.size(), 8u);
  EXPECT_EQ(audio.sample_rate, 48000.0);
  EXPECT_EQ(audio.channels.front().size(), 9600u);
}

TEST_F(CliTest, SimulateSameSeedIdenticalFiles) {
  const std::string args = "--seed 7 simulate --distance 2 --azimuth 40 --snr 10 --echo 10:0.5 --duration 0.2 -o ";
  ASSERT_EQ(cli(args + path("a.wav")).code, 0);
  ASSERT_EQ(cli(args + path("b.wav")).code, 0);
  EXPECT_EQ(slurp(path("a.wav")), slurp(path("b.wav")));
  ASSERT_EQ(cli("--seed 8 simulate --distance 2 --azimuth 40 --snr 10 --echo 10:0.5 --duration 0.2 -o " + path("c.wav")).code, 0);
  EXPECT_NE(slurp(path("a.wav")), slurp(path("c.wav")));
}

TEST_F(CliTest, BadGeometryFailsBeforeRendering) {
  std::ofstream(path("flat.json")) << R"({"microphones": [[0,0,0],[1,0,0],[0,1,0],[1,1,0]]})";
  EXPECT_EQ(cli("-g " + path("flat.json") + " simulate -o " + path("x.wav")).code, 2);
  EXPECT_FALSE(fs::exists(path("x.wav")));
  // Same file through the environment variable.
  EXPECT_EQ(cli("simulate -o " + path("x.wav"), "TDOALOC_GEOMETRY=" + path("flat.json")).code, 2);
  EXPECT_FALSE(fs::exists(path("x.wav")));
}

TEST_F(CliTest, LocateFindsSimulatedSource) {
  ASSERT_EQ(cli("simulate --distance 3 --azimuth 20 --snr 10 --duration 1 -o " + path("s.wav")).code, 0);
  const auto r = cli("locate " + path("s.wav"));
  ASSERT_EQ(r.code, 0);
  std::istringstream lines(r.out);
  std::string line;
  double sum = 0.0;
  int n = 0;
  while (std::getline(lines, line)) {
    sum += tdoaloc::parse_detection_line(line).azimuth_deg;
    ++n;
  }
  ASSERT_GT(n, 0);
  EXPECT_NEAR(sum / n, 20.0, 3.0);
  // --output writes the same stream to a file.
  ASSERT_EQ(cli("locate " + path("s.wav") + " -o " + path("d.jsonl")).code, 0);
  EXPECT_EQ(slurp(path("d.jsonl")), r.out);
}

TEST_F(CliTest, LocateRejectsChannelMismatch) {
  std::ofstream(path("tet.json")) << R"({"microphones": [[0,0,0],[0.3,0,0],[0,0.3,0],[0,0,0.3]]})";
  ASSERT_EQ(cli("simulate --source 3,0,0 --duration 0.2 -o " + path("s.wav")).code, 0);
  EXPECT_EQ(cli("-g " + path("tet.json") + " locate " + path("s.wav")).code, 2);
  EXPECT_EQ(cli("locate " + path("missing.wav")).code, 2);
}

TEST_F(CliTest, InputErrorsExitTwo) {
  EXPECT_EQ(cli("eval nonsense").code, 2);
  EXPECT_EQ(cli("--no-such-flag eval bench").code, 2);
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("--alpha -3 eval table1").code, 2);
  EXPECT_EQ(cli("simulate --echo 10 -o " + path("e.wav")).code, 2);
  EXPECT_EQ(cli("simulate --source 0.1,0,0 -o " + path("e.wav")).code, 2);  // inside the array
}

TEST_F(CliTest, WriteFailureExitsThree) {
  if (!fs::exists("/dev/full")) GTEST_SKIP() << "/dev/full not available";
  EXPECT_EQ(cli("simulate --duration 0.1 -o /dev/full").code, 3);
}

TEST_F(CliTest, ConfigPrecedence) {
  std::ofstream(path("cfg.json")) << R"({"alpha": 0.7, "peaks": 4})";
  auto value = [](const std::string& json, const std::string& key) {
    const auto at = json.find("\"" + key + "\": ");
    return json.substr(at + key.size() + 4, json.find_first_of(",\n", at) - at - key.size() - 4);
  };
  const auto defaults = cli("--show-config eval bench");
  ASSERT_EQ(defaults.code, 0);
  EXPECT_EQ(value(defaults.out, "alpha"), "0.4");
  EXPECT_EQ(value(defaults.out, "peaks"), "8");
  const auto file = cli("--config " + path("cfg.json") + " --show-config eval bench");
  EXPECT_EQ(value(file.out, "alpha"), "0.7");
  EXPECT_EQ(value(file.out, "peaks"), "4");
  const auto flag = cli("--config " + path("cfg.json") + " --alpha 0.5 --show-config eval bench");
  EXPECT_EQ(value(flag.out, "alpha"), "0.5");
  EXPECT_EQ(value(flag.out, "peaks"), "4");
  std::ofstream(path("bad.json")) << R"({"alpah": 0.7})";
  EXPECT_EQ(cli("--config " + path("bad.json") + " eval bench").code, 2);
}

TEST_F(CliTest, EnvironmentGeometry) {
  std::ofstream(path("tet.json")) << R"({"microphones": [[0,0,0],[0.3,0,0],[0,0.3,0],[0,0,0.3]], "sample_rate": 16000})";
  const auto r = cli("--show-config eval bench", "TDOALOC_GEOMETRY=" + path("tet.json"));
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("\"microphones\": 4"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("\"sample_rate\": 16000.0"), std::string::npos) << r.out;
  // --geometry wins over the environment.
  std::ofstream(path("prism.json")) << tdoaloc::format_geometry_config({tdoaloc::prism_positions(), {}, {}});
  const auto g = cli("-g " + path("prism.json") + " --show-config eval bench", "TDOALOC_GEOMETRY=" + path("tet.json"));
  EXPECT_NE(g.out.find("\"microphones\": 8"), std::string::npos) << g.out;
}

TEST_F(CliTest, EvalNearfieldCsv) {
  const auto r = cli("eval nearfield --distances 0.25,3 --trials 50");
  ASSERT_EQ(r.code, 0);
  std::istringstream lines(r.out);
  std::string header, row1, row2;
  std::getline(lines, header);
  std::getline(lines, row1);
  std::getline(lines, row2);
  EXPECT_EQ(header, "source,distance_m,trials,quantized,mean_error_deg");
  EXPECT_EQ(row1.rfind("simulated,0.25,50,true,", 0), 0u) << row1;
  EXPECT_EQ(row2.rfind("simulated,3,50,true,", 0), 0u) << row2;
}

TEST_F(CliTest, ShowConfigWithoutSubcommand) {
  const auto r = cli("--show-config --gate 5");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("\"gate\": 5.0"), std::string::npos) << r.out;
  EXPECT_EQ(cli("").code, 2);
}
