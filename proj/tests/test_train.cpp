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

#include <gtest/gtest.h>

#include <cmath>

#include "bts/dataset.hpp"
#include "bts/error.hpp"
#include "bts/train.hpp"

namespace bts::model {
namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.clip_length = 8;
  c.height = 4;
  c.width = 4;
  c.patch = 2;
  c.channels = 8;
  c.heads = 2;
  c.stages = 3;
  c.mlp_ratio = 2;
  return c;
}

std::vector<Sample> tiny_set(const ModelConfig& cfg, std::size_t n, std::uint64_t base) {
  std::vector<prep::ManifestRow> rows;
  for (std::size_t i = 0; i < n; ++i) {
    rows.push_back({"c" + std::to_string(i), base + i, 1.0 + 0.1 * static_cast<double>(i), 0.01,
                    0.02, "train"});
  }
  return load_split(rows, "train", DataSpec{}, cfg);
}

struct Fixture {
  ModelConfig cfg = tiny_config();
  std::vector<Sample> train_set = tiny_set(cfg, 5, 10);
  ModelState init{cfg, fit_norm(train_set), init_params(cfg, 3)};
  TrainConfig tc;
  Fixture() {
    tc.epochs = 4;
    tc.batch_size = 2;
    tc.seed = 5;
  }
};

TEST(CosineLr, Endpoints) {
  TrainConfig c;
  c.lr = 1e-3;
  c.final_lr_ratio = 0.01;
  EXPECT_DOUBLE_EQ(cosine_lr(c, 0, 100), 1e-3);
  EXPECT_NEAR(cosine_lr(c, 99, 100), 1e-5, 1e-18);
  EXPECT_NEAR(cosine_lr(c, 1000, 100), 1e-5, 1e-18);
  double prev = 1.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const double lr = cosine_lr(c, s, 100);
    EXPECT_LE(lr, prev);
    prev = lr;
  }
  EXPECT_DOUBLE_EQ(cosine_lr(c, 0, 1), 1e-3);
}

TEST(Train, DeterministicInSeed) {
  Fixture f;
  const TrainResult a = train(f.init, f.tc, f.train_set, {});
  const TrainResult b = train(f.init, f.tc, f.train_set, {});
  EXPECT_EQ(hash_params(a.checkpoint.state.params), hash_params(b.checkpoint.state.params));
  ASSERT_EQ(a.log.size(), 4u);
  for (std::size_t i = 0; i < a.log.size(); ++i) EXPECT_EQ(a.log[i].loss, b.log[i].loss);
  EXPECT_EQ(a.checkpoint.step, 12u);
  f.tc.seed = 6;
  const TrainResult c = train(f.init, f.tc, f.train_set, {});
  EXPECT_NE(hash_params(a.checkpoint.state.params), hash_params(c.checkpoint.state.params));
}

TEST(Train, ThreadCountDoesNotChangeResult) {
  Fixture f;
  const TrainResult a = train(f.init, f.tc, f.train_set, {});
  f.tc.threads = 3;
  const TrainResult b = train(f.init, f.tc, f.train_set, {});
  EXPECT_EQ(hash_params(a.checkpoint.state.params), hash_params(b.checkpoint.state.params));
}

TEST(Train, BatchGradientsIndependentOfThreads) {
  Fixture f;
  std::vector<const Sample*> batch;
  for (const auto& s : f.train_set) batch.push_back(&s);
  std::vector<std::vector<double>> g1, g4;
  const double l1 = batch_gradients(f.init, batch, 1, g1);
  const double l4 = batch_gradients(f.init, batch, 4, g4);
  EXPECT_EQ(l1, l4);
  EXPECT_EQ(g1, g4);
  EXPECT_EQ(g1.size(), f.init.params.size());
}

TEST(Train, ResumeMatchesUninterruptedRunAtConstantRate) {
  Fixture f;
  f.tc.final_lr_ratio = 1.0;
  const TrainResult full = train(f.init, f.tc, f.train_set, {});
  TrainConfig half = f.tc;
  half.epochs = 2;
  const TrainResult first = train(f.init, half, f.train_set, {});
  EXPECT_EQ(first.checkpoint.step, 6u);
  const TrainResult rest = train(f.init, f.tc, f.train_set, {}, first.checkpoint);
  ASSERT_EQ(rest.log.size(), 2u);
  EXPECT_EQ(rest.log.front().epoch, 3u);
  EXPECT_EQ(rest.checkpoint.step, 12u);
  EXPECT_EQ(hash_params(rest.checkpoint.state.params), hash_params(full.checkpoint.state.params));
  EXPECT_EQ(rest.log.back().loss, full.log.back().loss);
}

TEST(Train, ResumeAtFinalEpochIsNoOp) {
  Fixture f;
  const TrainResult done = train(f.init, f.tc, f.train_set, {});
  const TrainResult again = train(f.init, f.tc, f.train_set, {}, done.checkpoint);
  EXPECT_TRUE(again.log.empty());
  EXPECT_EQ(hash_params(again.checkpoint.state.params), hash_params(done.checkpoint.state.params));
}

TEST(Train, LossDecreasesOnTinyTask) {
  Fixture f;
  f.tc.epochs = 15;
  f.tc.lr = 3e-3;
  const TrainResult r = train(f.init, f.tc, f.train_set, {});
  EXPECT_LT(r.log.back().loss, r.log.front().loss);
}

TEST(Train, ValidationRowsAndErrors) {
  Fixture f;
  f.tc.epochs = 2;
  const auto val = tiny_set(f.cfg, 2, 50);
  const TrainResult r = train(f.init, f.tc, f.train_set, val);
  ASSERT_EQ(r.log.size(), 4u);
  EXPECT_EQ(r.log[1].split, "val");
  EXPECT_DOUBLE_EQ(r.log[3].loss, evaluate_loss(r.checkpoint.state, val));
  EXPECT_THROW(train(f.init, f.tc, {}, {}), ValidationError);
  f.tc.batch_size = 0;
  EXPECT_THROW(train(f.init, f.tc, f.train_set, {}), ValidationError);
}

TEST(Train, NonFiniteLossIsNumericalError) {
  Fixture f;
  ModelState bad = f.init;
  bad.params = bind_leaves(f.init.params);
  bad.params.at("head.weight").mutable_data()[0] = std::nan("");
  for (auto& [k, v] : bad.params) v = v.detach();
  EXPECT_THROW(train(bad, f.tc, f.train_set, {}), NumericalError);
}

TEST(Dataset, WindowsAndNorm) {
  ModelConfig cfg = tiny_config();
  DataSpec spec;
  spec.sequence_length = 20;
  spec.window_stride = 4;
  const auto s = load_split({{"a", 1, 1.2, 0.01, 0.02, "train"}, {"b", 2, 1.4, 0.01, 0.02, "test"}},
                            "train", spec, cfg);
  ASSERT_EQ(s.size(), 4u);  // starts 0, 4, 8, 12
  EXPECT_EQ(s[0].id, "a@0");
  EXPECT_EQ(s[3].id, "a@12");
  EXPECT_EQ(s[2].clip.length(), 8u);
  EXPECT_EQ(s[2].target.samples.size(), 8u);
  const auto norm = fit_norm(s);
  for (double sd : norm.stddev) EXPECT_GT(sd, 0.0);
  EXPECT_TRUE(load_split({{"b", 2, 1.4, 0.01, 0.02, "test"}}, "train", spec, cfg).empty());
}

}  // namespace
}  // namespace bts::model
