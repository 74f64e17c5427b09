// Copyright (c) 2026 The bts-rppg Authors. All Rights Reserved.
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

// Drives the installed `bts` executable end to end.

#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;

// Small geometry: 16 frames at 8 fps (two seconds for the HR estimator).
constexpr const char* kTinyConfig = R"({
  "model.clip_length": 16, "model.height": 4, "model.width": 4, "model.patch": 2,
  "model.channels": 8, "model.heads": 2, "model.stages": 3, "model.mlp_ratio": 2,
  "model.frame_rate": 8.0,
  "data.train_clips": 3, "data.val_clips": 1, "data.test_clips": 2,
  "train.epochs": 2, "train.batch_size": 2,
  "ablate.seeds": 5
})";

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           ("bts_cli_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "tiny.json") << kTinyConfig;
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Exit status of `bts <args>`; stderr goes to dir_/stderr.txt.
  int run(const std::string& args) const {
    const std::string cmd = std::string(BTS_CLI_PATH) + " " + args + " -q > " +
                            (dir_ / "stdout.txt").string() + " 2> " + (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  // Tiny config with the given output subdirectory.
  int tiny(const std::string& command, const std::string& out, const std::string& extra = "") const {
    return run(command + " --config " + (dir_ / "tiny.json").string() + " --out " +
               (dir_ / out).string() + " " + extra);
  }
  static std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
  }
  static std::vector<std::string> lines(const fs::path& p) {
    std::vector<std::string> out;
    std::ifstream is(p);
    for (std::string line; std::getline(is, line);) out.push_back(line);
    return out;
  }
  fs::path dir_;
};

TEST_F(Cli, SynthSplitCountsAndDeterminism) {
  ASSERT_EQ(run("synth --out " + (dir_ / "a").string()), 0);
  ASSERT_EQ(run("synth --out " + (dir_ / "b").string()), 0);
  const auto rows = lines(dir_ / "a" / "manifest.csv");
  ASSERT_EQ(rows.size(), 25u);
  std::map<std::string, int> counts;
  for (std::size_t i = 1; i < rows.size(); ++i) counts[rows[i].substr(rows[i].rfind(',') + 1)]++;
  EXPECT_EQ(counts["train"], 16);
  EXPECT_EQ(counts["val"], 4);
  EXPECT_EQ(counts["test"], 4);
  EXPECT_EQ(slurp(dir_ / "a" / "manifest.csv"), slurp(dir_ / "b" / "manifest.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "a" / "synth.resolved.json"));
  ASSERT_EQ(run("synth --seed 1 --out " + (dir_ / "c").string()), 0);
  EXPECT_NE(slurp(dir_ / "a" / "manifest.csv"), slurp(dir_ / "c" / "manifest.csv"));
}

TEST_F(Cli, SynthRejectsOutOfBandFrequency) {
  EXPECT_EQ(run("synth --set data.freq_max=3.5 --out " + (dir_ / "a").string()), 3);
}

TEST_F(Cli, TrainEvalPipelineIsDeterministic) {
  for (const std::string out : {"r1", "r2"}) {
    ASSERT_EQ(tiny("synth", out), 0);
    ASSERT_EQ(tiny("train", out), 0) << slurp(dir_ / "stderr.txt");
    ASSERT_EQ(tiny("eval", out), 0) << slurp(dir_ / "stderr.txt");
  }
  for (const char* f : {"manifest.csv", "train_log.csv", "metrics.csv", "eval_clips.csv", "waveforms.csv",
                        "train.resolved.json"}) {
    EXPECT_EQ(slurp(dir_ / "r1" / f), slurp(dir_ / "r2" / f)) << f;
  }
  EXPECT_EQ(slurp(dir_ / "r1" / "checkpoint.bin"), slurp(dir_ / "r2" / "checkpoint.bin"));
  // Two test clips of 16 frames plus the header.
  EXPECT_EQ(lines(dir_ / "r1" / "waveforms.csv").size(), 33u);
  const auto metrics = lines(dir_ / "r1" / "metrics.csv");
  ASSERT_EQ(metrics.size(), 3u);
  EXPECT_EQ(metrics[0], "method,split,clips,mae,mape,rmse,pearson,mean_loss");
  EXPECT_EQ(metrics[1].substr(0, 10), "bts,test,2");
  EXPECT_EQ(metrics[2].substr(0, 10), "pos,test,2");
  EXPECT_TRUE(fs::exists(dir_ / "r1" / "waveforms.svg"));
  EXPECT_EQ(lines(dir_ / "r1" / "train_log.csv").size(), 5u);  // header + 2 x (train, val)
}

TEST_F(Cli, EvalOnTrainSplit) {
  ASSERT_EQ(tiny("synth", "r"), 0);
  ASSERT_EQ(tiny("train", "r"), 0);
  ASSERT_EQ(tiny("eval", "r", "--set eval.split=train"), 0);
  EXPECT_EQ(lines(dir_ / "r" / "waveforms.csv").size(), 3u * 16 + 1);
}

TEST_F(Cli, ResumeContinuesStepCounter) {
  ASSERT_EQ(tiny("synth", "r"), 0);
  ASSERT_EQ(tiny("train", "r"), 0);
  fs::copy_file(dir_ / "r" / "checkpoint.bin", dir_ / "first.bin");
  ASSERT_EQ(tiny("train", "r",
                 "--set train.epochs=4 --set train.resume=" + (dir_ / "first.bin").string()),
            0)
      << slurp(dir_ / "stderr.txt");
  const auto log = lines(dir_ / "r" / "train_log.csv");
  ASSERT_EQ(log.size(), 5u);
  EXPECT_EQ(log[1].substr(0, 8), "3,train,");
  EXPECT_EQ(log[3].substr(0, 8), "4,train,");
}

TEST_F(Cli, ResumeRejectsDifferentModel) {
  ASSERT_EQ(tiny("synth", "r"), 0);
  ASSERT_EQ(tiny("train", "r"), 0);
  EXPECT_EQ(tiny("train", "r",
                 "--set model.channels=16 --set train.resume=" + (dir_ / "r" / "checkpoint.bin").string()),
            3);
}

TEST_F(Cli, TrainFailsFastOnIncompatibleClipLength) {
  ASSERT_EQ(run("synth --out " + (dir_ / "r").string()), 0);
  EXPECT_EQ(run("train --set model.clip_length=100 --out " + (dir_ / "r").string()), 3);
  EXPECT_NE(slurp(dir_ / "stderr.txt").find("pairs with"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "r" / "checkpoint.bin"));
}

TEST_F(Cli, MissingInputsAreIoErrors) {
  EXPECT_EQ(tiny("train", "none"), 1);
  ASSERT_EQ(tiny("synth", "r"), 0);
  EXPECT_EQ(tiny("eval", "r"), 1);
  EXPECT_NE(slurp(dir_ / "stderr.txt").find("checkpoint"), std::string::npos);
}

TEST_F(Cli, EvalRejectsMismatchedConfig) {
  ASSERT_EQ(tiny("synth", "r"), 0);
  ASSERT_EQ(tiny("train", "r"), 0);
  EXPECT_EQ(tiny("eval", "r", "--set model.heads=4"), 3);
}

TEST_F(Cli, GradcheckPassesAndListsEveryTarget) {
  ASSERT_EQ(run("gradcheck --out " + (dir_ / "g").string()), 0) << slurp(dir_ / "stderr.txt");
  const auto rows = lines(dir_ / "g" / "gradcheck.csv");
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows[0], "target,max_rel_error,evaluations,passed");
  std::map<std::string, int> seen;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    seen[rows[i].substr(0, rows[i].find(','))]++;
    EXPECT_EQ(rows[i].substr(rows[i].rfind(',') + 1), "true");
  }
  for (const char* t : {"oft", "bts_apply", "layer_norm", "msa", "pearson_loss", "end_to_end"}) {
    EXPECT_EQ(seen[t], 1) << t;
  }
}

TEST_F(Cli, GradcheckDetectsInjectedFault) {
  EXPECT_EQ(run("gradcheck --set gradcheck.inject_fault=msa --out " + (dir_ / "g").string()), 4);
  const auto rows = lines(dir_ / "g" / "gradcheck.csv");
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_NE(slurp(dir_ / "g" / "gradcheck.csv").find("msa,"), std::string::npos);
  int failed = 0;
  for (const auto& r : rows) failed += r.ends_with(",false");
  EXPECT_EQ(failed, 1);
  EXPECT_EQ(run("gradcheck --set gradcheck.inject_fault=nothing --out " + (dir_ / "g").string()), 2);
}

TEST_F(Cli, AnalyzeScheduleGrowthCurves) {
  ASSERT_EQ(run("analyze-schedule --out " + (dir_ / "s").string()), 0);
  const auto rows = lines(dir_ / "s" / "schedule.csv");
  ASSERT_EQ(rows.size(), 1u + 4 * 6);
  EXPECT_EQ(rows[0], "variant,cycle,stage,min,mean,max");
  std::map<std::string, std::string> last;
  for (std::size_t i = 1; i < rows.size(); ++i) last[rows[i].substr(0, rows[i].find(','))] = rows[i];
  EXPECT_EQ(last["butterfly"], "butterfly,0,6,64,64,64");
  EXPECT_EQ(last["local-only"], "local-only,0,6,2,2,2");
  EXPECT_EQ(last["linear"], "linear,0,6,8,8,8");
  EXPECT_TRUE(fs::exists(dir_ / "s" / "schedule.svg"));
}

TEST_F(Cli, AblationCountsRunsAndAggregates) {
  ASSERT_EQ(tiny("synth", "a"), 0);
  ASSERT_EQ(tiny("ablate", "a", "--set train.epochs=1 --set ablate.sweep=both --threads 2"), 0)
      << slurp(dir_ / "stderr.txt");
  const auto runs = lines(dir_ / "a" / "ablation_runs.csv");
  ASSERT_EQ(runs.size(), 1u + 20 + 20);
  const auto summary = lines(dir_ / "a" / "ablation_summary.csv");
  ASSERT_EQ(summary.size(), 1u + 4 + 4);
  int fold_rows = 0;
  for (const auto& r : summary) fold_rows += r.starts_with("fold,rho=");
  EXPECT_EQ(fold_rows, 4);
  EXPECT_NE(slurp(dir_ / "a" / "ablation_summary.csv").find("schedule,butterfly,5,"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "a" / "ablation_schedule.svg"));
  EXPECT_TRUE(fs::exists(dir_ / "a" / "ablation_fold.svg"));
}

TEST_F(Cli, ConfigErrors) {
  EXPECT_EQ(run("synth --set model.nonsense=1 --out " + (dir_ / "a").string()), 2);
  EXPECT_EQ(run("synth --set train.epochs=\\\"x\\\" --out " + (dir_ / "a").string()), 2);
  EXPECT_EQ(run("synth --precision 32 --out " + (dir_ / "a").string()), 2);
  EXPECT_EQ(run("synth --precision 16 --out " + (dir_ / "a").string()), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  std::ofstream(dir_ / "bad.json") << "{ not json";
  EXPECT_EQ(run("synth --config " + (dir_ / "bad.json").string() + " --out " + (dir_ / "a").string()), 2);
}

TEST_F(Cli, ResolvedConfigAppliesOverrides) {
  ASSERT_EQ(tiny("synth", "a", "--seed 9 --threads 3 --set data.noise_std=0.2"), 0);
  const std::string resolved = slurp(dir_ / "a" / "synth.resolved.json");
  EXPECT_NE(resolved.find("\"seed\": 9"), std::string::npos);
  EXPECT_NE(resolved.find("\"threads\": 3"), std::string::npos);
  EXPECT_NE(resolved.find("\"data.noise_std\": 0.2"), std::string::npos);
  EXPECT_NE(resolved.find("\"model.clip_length\": 16"), std::string::npos);
  // Defaults are written too.
  EXPECT_NE(resolved.find("\"train.weight_decay\""), std::string::npos);
}

TEST_F(Cli, ThreadsEnvironmentVariable) {
  ::setenv("BTS_THREADS", "2", 1);
  const int code = tiny("synth", "a");
  ::unsetenv("BTS_THREADS");
  ASSERT_EQ(code, 0);
  EXPECT_NE(slurp(dir_ / "a" / "synth.resolved.json").find("\"threads\": 2"), std::string::npos);
}

}  // namespace
