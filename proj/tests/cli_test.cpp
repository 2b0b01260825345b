// Copyright 2026 The DRSM Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "drsm/cli.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace drsm {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "drsm_cli_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    ASSERT_EQ(cli({"gen", "--frames", "20", "--seed", "4", "--out", path("d.drsd"), "--set", "grid.n_range=16",
                   "--set", "grid.n_azimuth=16"})
                  .code,
              kExitOk);
    ASSERT_EQ(cli({"train", "--model", "vae-mixed", "--data", path("d.drsd"), "--epochs", "2", "--seed", "1", "--out",
                   path("m.ckpt")})
                  .code,
              kExitOk);
  }
  static std::string path(const std::string& name) { return (dir_ / name).string(); }
  static fs::path dir_;
};

fs::path CliTest::dir_;

TEST_F(CliTest, GenRejectsZeroFrames) {
  const CliRun r = cli({"gen", "--frames", "0", "--out", path("z.drsd")});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("frames must be"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(path("z.drsd")));
}

TEST_F(CliTest, UsageErrorsExitWithTwo) {
  EXPECT_EQ(cli({"gen", "--frames", "3", "--out", path("u.drsd"), "--set", "no_such_key=1"}).code, kExitUsage);
  EXPECT_EQ(cli({"train", "--model", "vae+adv", "--data", path("d.drsd"), "--out", path("x.ckpt")}).code, kExitUsage);
  EXPECT_EQ(cli({"train", "--model", "vae", "--alpha", "0.5", "--data", path("d.drsd"), "--out", path("x.ckpt")}).code,
            kExitUsage);
  EXPECT_EQ(cli({"train", "--model", "normal", "--data", path("d.drsd"), "--out", path("x.ckpt"), "--set",
                 "train.alpha=0.5"})
                .code,
            kExitUsage);
  EXPECT_EQ(cli({"render", "--data", path("d.drsd"), "--frame", "20", "--out", path("x.pgm")}).code, kExitUsage);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(cli({"gen", "--out", path("u.drsd")}).code, kExitUsage);
}

TEST_F(CliTest, MissingOrCorruptFilesExitWithThree) {
  EXPECT_EQ(cli({"render", "--data", path("absent.drsd"), "--frame", "0", "--out", path("x.pgm")}).code, kExitIo);
  std::ofstream(path("junk.drsd")) << "not a dataset";
  EXPECT_EQ(cli({"render", "--data", path("junk.drsd"), "--frame", "0", "--out", path("x.pgm")}).code, kExitIo);
  EXPECT_EQ(cli({"eval", "--model", path("absent.ckpt"), "--data", path("d.drsd"), "--report", path("r.json")}).code,
            kExitIo);
}

TEST_F(CliTest, AlphaIsAcceptedForTheMixedModel) {
  EXPECT_EQ(cli({"train", "--model", "vae-mixed", "--alpha", "0.5", "--data", path("d.drsd"), "--epochs", "1",
                 "--out", path("a.ckpt")})
                .code,
            kExitOk);
}

TEST_F(CliTest, GenTrainEvalAreByteDeterministic) {
  ASSERT_EQ(cli({"gen", "--frames", "20", "--seed", "4", "--out", path("d2.drsd"), "--set", "grid.n_range=16", "--set",
                 "grid.n_azimuth=16"})
                .code,
            kExitOk);
  EXPECT_EQ(slurp(path("d.drsd")), slurp(path("d2.drsd")));
  ASSERT_EQ(cli({"train", "--model", "vae-mixed", "--data", path("d.drsd"), "--epochs", "2", "--seed", "1", "--out",
                 path("m2.ckpt")})
                .code,
            kExitOk);
  EXPECT_EQ(slurp(path("m.ckpt")), slurp(path("m2.ckpt")));
  ASSERT_EQ(cli({"eval", "--model", path("m.ckpt"), "--data", path("d.drsd"), "--seed", "5", "--report", path("r1.json")})
                .code,
            kExitOk);
  ASSERT_EQ(cli({"eval", "--model", path("m2.ckpt"), "--data", path("d.drsd"), "--seed", "5", "--report",
                 path("r2.json")})
                .code,
            kExitOk);
  EXPECT_EQ(slurp(path("r1.json")), slurp(path("r2.json")));
}

TEST_F(CliTest, EvalReportAndMetricLines) {
  const CliRun r = cli({"eval", "--model", path("m.ckpt"), "--data", path("d.drsd"), "--report", path("r.json")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const char* line : {"rmse_db: ", "p0_model_db: ", "p0_truth_db: ", "kl_distance: ", "kl_angle: ", "kl_power: "}) {
    EXPECT_NE(r.out.find(line), std::string::npos) << line;
  }
  const auto j = nlohmann::json::parse(slurp(path("r.json")));
  EXPECT_EQ(j["variant"], "vae_mixed");
  EXPECT_EQ(j["test_frames"], 2);
  EXPECT_TRUE(j.contains("config"));

  const CliRun replay = cli({"eval", "--model", "replay", "--data", path("d.drsd"), "--report", path("rr.json")});
  ASSERT_EQ(replay.code, kExitOk) << replay.err;
  const auto jr = nlohmann::json::parse(slurp(path("rr.json")));
  EXPECT_EQ(jr["rmse_db"], 0.0);
  EXPECT_EQ(jr["kl_distance"], 0.0);
}

TEST_F(CliTest, TrainWritesLogWithConfigHeader) {
  std::istringstream log(slurp(path("m.ckpt") + ".log.jsonl"));
  std::string line;
  std::vector<nlohmann::json> rows;
  while (std::getline(log, line)) rows.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_TRUE(rows[0].contains("config"));
  EXPECT_EQ(rows[1]["epoch"], 0);
  EXPECT_EQ(rows[2]["epoch"], 1);
}

TEST_F(CliTest, SampleWritesTruthPlusKImages) {
  const fs::path out = dir_ / "samples";
  const CliRun r = cli({"sample", "--model", path("m.ckpt"), "--data", path("d.drsd"), "--frame", "3", "--n", "3", "--out",
                     out.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  int pgms = 0;
  for (const auto& e : fs::directory_iterator(out)) pgms += e.path().extension() == ".pgm";
  EXPECT_EQ(pgms, 4);
  EXPECT_TRUE(fs::exists(out / "truth.pgm"));
  EXPECT_EQ(slurp(out / "truth.pgm").substr(0, 13), "P5 16 16 255\n");
  const std::string first = slurp(out / "sample_000.pgm");
  ASSERT_EQ(cli({"sample", "--model", path("m.ckpt"), "--data", path("d.drsd"), "--frame", "3", "--n", "3", "--out",
                 out.string()})
                .code,
            kExitOk);
  EXPECT_EQ(first, slurp(out / "sample_000.pgm"));
}

TEST_F(CliTest, RenderWritesPgmAndSidecar) {
  ASSERT_EQ(cli({"render", "--data", path("d.drsd"), "--frame", "0", "--out", path("f0.pgm")}).code, kExitOk);
  const std::string pgm = slurp(path("f0.pgm"));
  EXPECT_EQ(pgm.substr(0, 13), "P5 16 16 255\n");
  EXPECT_EQ(pgm.size(), 13u + 256u);
  EXPECT_TRUE(fs::exists(path("f0.pgm") + ".json"));
}

TEST_F(CliTest, SeedFallsBackToEnvironment) {
  ::setenv("DRS_SEED", "4", 1);
  const CliRun r = cli({"gen", "--frames", "20", "--out", path("env.drsd"), "--set", "grid.n_range=16", "--set",
                     "grid.n_azimuth=16"});
  ::unsetenv("DRS_SEED");
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(slurp(path("env.drsd")), slurp(path("d.drsd")));
  ::setenv("DRS_SEED", "-3", 1);
  EXPECT_EQ(cli({"gen", "--frames", "2", "--out", path("neg.drsd")}).code, kExitUsage);
  ::unsetenv("DRS_SEED");
}

TEST_F(CliTest, EveryRunEchoesItsConfig) {
  const CliRun r = cli({"render", "--data", path("d.drsd"), "--frame", "1", "--out", path("f1.pgm")});
  ASSERT_EQ(r.code, kExitOk);
  EXPECT_EQ(r.out.rfind("config ", 0), 0u) << r.out;
}

}  // namespace
}  // namespace drsm
