// Copyright 2026 The meter-rt Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <string>

#include "json.hpp"

namespace {

namespace fs = std::filesystem;

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(METER_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  RunResult r;
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::map<std::string, std::string> parse_report(const std::string& out) {
  std::map<std::string, std::string> kv;
  std::istringstream in(out);
  std::string line;
  static const std::regex pattern(R"(^([a-z0-9_]+): (.+)$)");
  std::smatch m;
  while (std::getline(in, line)) {
    if (std::regex_match(line, m, pattern)) kv[m[1]] = m[2];
  }
  return kv;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("meter_cli_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string plane_dataset(const std::string& name, double depth) {
    const RunResult r = run("synth --out-dir " + path(name) + " --count 2 --scene plane --near " + std::to_string(depth) +
                            " --size 128x128");
    EXPECT_EQ(r.code, 0) << r.out;
    return path(name + "/manifest.json");
  }

  fs::path dir_;
};

TEST_F(CliTest, ProfileSmallVariantTotals) {
  const RunResult r = run("profile --variant s --input-size 256x192");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto kv = parse_report(r.out);
  EXPECT_NEAR(std::stod(kv.at("params")) / 3.29e6, 1.0, 0.05);
  EXPECT_NEAR(std::stod(kv.at("macs")) / 0.975e9, 1.0, 0.10);
  EXPECT_NE(r.out.find("enc.meter_2.tr.attn"), std::string::npos);
}

TEST_F(CliTest, ProfileTinyVariantOutdoorMacs) {
  const RunResult r = run("profile --variant xxs --input-size 636x192 --totals-only");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NEAR(std::stod(parse_report(r.out).at("macs")) / 0.464e9, 1.0, 0.10);
}

TEST_F(CliTest, ReportLinesFollowKeyValueGrammar) {
  const RunResult r = run("profile --variant xs --input-size 256x192 --totals-only");
  ASSERT_EQ(r.code, 0);
  std::istringstream in(r.out);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    EXPECT_TRUE(std::regex_match(line, std::regex(R"(^[a-z0-9_]+: \S.*$)"))) << line;
    ++lines;
  }
  EXPECT_GT(lines, 5u);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run("profile --variant s --input-size 100x100").code, 2);
  EXPECT_EQ(run("profile --variant m").code, 2);
  EXPECT_EQ(run("profile --no-such-flag").code, 2);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("infer --out x.png").code, 2);
  EXPECT_EQ(run("bench --variant xxs --input-size 64x64 --iters 0").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST_F(CliTest, InferSmokeAndDeterminism) {
  const std::string manifest = plane_dataset("plane", 2.0);
  ASSERT_EQ(run("--seed 5 init --variant xxs --out " + path("w.meter")).code, 0);
  const std::string args = "infer --weights " + path("w.meter") + " --image " + path("plane/rgb/0000.png") +
                           " --input-size 128x128 --out " + path("d.png") + " --raw-out ";
  const RunResult a = run(args + path("a.bin"));
  ASSERT_EQ(a.code, 0) << a.out;
  const auto kv = parse_report(a.out);
  EXPECT_EQ(kv.at("finite"), "true");
  EXPECT_EQ(kv.at("output"), "64x64");
  EXPECT_TRUE(fs::exists(path("d.png")));
  ASSERT_EQ(run(args + path("b.bin")).code, 0);
  EXPECT_EQ(read_bytes(path("a.bin")), read_bytes(path("b.bin")));
  EXPECT_EQ(read_bytes(path("a.bin")).substr(0, 8), "MDEPTHF1");
}

TEST_F(CliTest, InferVariantMismatchExitsOne) {
  plane_dataset("plane", 2.0);
  ASSERT_EQ(run("init --variant xs --out " + path("w.meter")).code, 0);
  const RunResult r = run("infer --weights " + path("w.meter") + " --variant s --image " + path("plane/rgb/0000.png") +
                          " --out " + path("d.png"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("variant xs"), std::string::npos) << r.out;
}

TEST_F(CliTest, InferMissingArchiveExitsOne) {
  plane_dataset("plane", 2.0);
  const RunResult r = run("infer --weights " + path("none.meter") + " --image " + path("plane/rgb/0000.png") +
                          " --out " + path("d.png"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("cannot open"), std::string::npos) << r.out;
}

TEST_F(CliTest, EvalGroundTruthPredictorIsPerfect) {
  const std::string manifest = plane_dataset("plane", 3.0);
  const RunResult r = run("eval --dataset " + manifest + " --predictor ground-truth --input-size 128x128");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto kv = parse_report(r.out);
  EXPECT_DOUBLE_EQ(std::stod(kv.at("rmse_m")), 0.0);
  EXPECT_DOUBLE_EQ(std::stod(kv.at("rel")), 0.0);
  EXPECT_DOUBLE_EQ(std::stod(kv.at("delta1")), 1.0);
}

TEST_F(CliTest, EvalConstantPredictorOnMatchingPlane) {
  const std::string manifest = plane_dataset("plane", 2.0);
  const auto kv = parse_report(run("eval --dataset " + manifest + " --predictor constant=2.0 --input-size 128x128").out);
  EXPECT_DOUBLE_EQ(std::stod(kv.at("rmse_m")), 0.0);
  EXPECT_DOUBLE_EQ(std::stod(kv.at("rel")), 0.0);
  EXPECT_DOUBLE_EQ(std::stod(kv.at("delta1")), 1.0);
}

TEST_F(CliTest, EvalConstantPredictorOnFartherPlane) {
  const std::string manifest = plane_dataset("plane", 2.5);
  const RunResult r = run("eval --dataset " + manifest + " --predictor constant=2.0 --input-size 128x128 --json-out " +
                          path("report.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto kv = parse_report(r.out);
  EXPECT_NEAR(std::stod(kv.at("rmse_m")), 0.5, 1e-6);
  EXPECT_NEAR(std::stod(kv.at("rel")), 0.2, 1e-6);
  EXPECT_DOUBLE_EQ(std::stod(kv.at("delta1")), 0.0);
  const auto j = nlohmann::json::parse(read_bytes(path("report.json")));
  EXPECT_EQ(j.at("per_image").size(), 2u);
  EXPECT_EQ(j.at("rmse_m"), "0.500000");
}

TEST_F(CliTest, EvalEmptyDatasetExitsTwo) {
  {
    std::ofstream out(path("empty.json"));
    out << R"({"depth_encoding": "png16_mm", "max_depth_m": 10, "unit": "indoor_cm", "entries": []})";
  }
  const RunResult r = run("eval --dataset " + path("empty.json") + " --predictor ground-truth");
  EXPECT_EQ(r.code, 2) << r.out;
}

TEST_F(CliTest, EvalModelRunsOverDataset) {
  const std::string manifest = plane_dataset("plane", 2.0);
  const RunResult r = run("eval --dataset " + manifest + " --variant xxs --input-size 128x128");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(parse_report(r.out).at("images_evaluated"), "2");
}

TEST_F(CliTest, BenchSingleIteration) {
  const RunResult r = run("bench --variant xxs --input-size 64x64 --iters 1 --warmup 0");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto kv = parse_report(r.out);
  const double ms = std::stod(kv.at("latency_ms_mean"));
  EXPECT_NEAR(std::stod(kv.at("fps")) * ms / 1000.0, 1.0, 2e-3);
  EXPECT_EQ(kv.at("outputs_identical"), "true");
  EXPECT_EQ(kv.at("iterations"), "1");
}

TEST_F(CliTest, SelfcheckPassesOnCleanBuild) {
  const RunResult r = run("selfcheck");
  EXPECT_EQ(r.code, 0) << r.out;
  const auto kv = parse_report(r.out);
  EXPECT_EQ(kv.at("status"), "PASS");
  EXPECT_EQ(kv.at("failed"), "0");
  std::istringstream in(r.out);
  std::string line;
  std::size_t checks = 0;
  while (std::getline(in, line)) {
    if (line.find("measured=") != std::string::npos) {
      EXPECT_NE(line.find("tolerance="), std::string::npos) << line;
      ++checks;
    }
  }
  EXPECT_EQ(std::to_string(checks), kv.at("checks"));
}

TEST_F(CliTest, SelfcheckReportsInjectedSobelFault) {
  const RunResult r = run("selfcheck --inject-sobel-fault 0.05");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("gradcheck_l_grad: FAIL"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("gradcheck_l_depth: PASS"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("status: FAIL"), std::string::npos);
}

TEST_F(CliTest, AugmentPreviewWritesPairAndIsSeeded) {
  const std::string manifest = plane_dataset("plane", 2.0);
  const std::string args = "augment-preview --dataset " + manifest + " --input-size 128x128 --all --out-dir ";
  const RunResult a = run("--seed 9 " + args + path("a"));
  ASSERT_EQ(a.code, 0) << a.out;
  for (const char* f : {"rgb_before.png", "rgb_after.png", "depth_before.png", "depth_after.png"}) {
    EXPECT_TRUE(fs::exists(dir_ / "a" / f)) << f;
  }
  const RunResult b = run("--seed 9 " + args + path("b"));
  EXPECT_EQ(read_bytes(path("a/rgb_after.png")), read_bytes(path("b/rgb_after.png")));
  const auto ka = parse_report(a.out);
  EXPECT_EQ(ka.at("vflip"), "true");
  EXPECT_NE(ka.at("d_shift"), "false");
}

TEST_F(CliTest, SynthIsDeterministic) {
  ASSERT_EQ(run("--seed 4 synth --out-dir " + path("a") + " --count 3 --size 64x48").code, 0);
  ASSERT_EQ(run("--seed 4 synth --out-dir " + path("b") + " --count 3 --size 64x48").code, 0);
  for (const char* f : {"rgb/0002.png", "depth/0002.png", "manifest.json"}) {
    EXPECT_EQ(read_bytes(dir_ / "a" / f), read_bytes(dir_ / "b" / f)) << f;
  }
  EXPECT_EQ(run("synth --out-dir " + path("c") + " --encoding jpeg").code, 2);
}

TEST_F(CliTest, JsonOutMirrorsReport) {
  const RunResult r = run("profile --variant xxs --totals-only --json-out " + path("p.json"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(read_bytes(path("p.json")));
  EXPECT_EQ(std::to_string(j.at("params").get<std::uint64_t>()), parse_report(r.out).at("params"));
  EXPECT_FALSE(j.at("per_layer").empty());
}

}  // namespace
