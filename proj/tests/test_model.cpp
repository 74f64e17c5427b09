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
#include <filesystem>
#include <fstream>
#include <sstream>
#include <random>

#include "bts/error.hpp"
#include "bts/grad_check.hpp"
#include "bts/model.hpp"
#include "bts/ops.hpp"
#include "bts/train.hpp"
#include "test_util.hpp"

namespace bts::model {
namespace {

using ad::Tensor;
using testing::randn;
using Vec = std::vector<double>;

ModelConfig small_config() {
  ModelConfig c;
  c.clip_length = 8;
  c.height = 4;
  c.width = 4;
  c.patch = 2;
  c.channels = 8;
  c.heads = 2;
  c.stages = 3;
  c.mlp_ratio = 2;
  c.fold_ratio = 0.25;
  return c;
}

// Row-major y[r, :] = x[r, :] W + b for x [rows, in].
Vec affine(const Vec& x, std::size_t rows, const Tensor& w, const Tensor& b) {
  const std::size_t in = w.dim(0), out = w.dim(1);
  Vec y(rows * out);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t o = 0; o < out; ++o) {
      double s = b.at(o);
      for (std::size_t i = 0; i < in; ++i) s += x[r * in + i] * w.at(i * out + o);
      y[r * out + o] = s;
    }
  }
  return y;
}

Vec layer_norm_rows(const Vec& x, std::size_t C, const Tensor& g, const Tensor& b) {
  Vec y(x.size());
  for (std::size_t r = 0; r < x.size() / C; ++r) {
    double m = 0, v = 0;
    for (std::size_t c = 0; c < C; ++c) m += x[r * C + c];
    m /= C;
    for (std::size_t c = 0; c < C; ++c) v += (x[r * C + c] - m) * (x[r * C + c] - m);
    v /= C;
    for (std::size_t c = 0; c < C; ++c) {
      y[r * C + c] = (x[r * C + c] - m) / std::sqrt(v + ad::kLayerNormEps) * g.at(c) + b.at(c);
    }
  }
  return y;
}

// Plain per-frame transformer block written with explicit loops.
Vec reference_block(const Vec& x, std::size_t T, std::size_t N, const ParamMap& p,
                    const ModelConfig& cfg, std::size_t cycle, std::size_t stage) {
  auto P = [&](const std::string& n) -> const Tensor& { return param(p, block_key(cycle, stage, n)); };
  const std::size_t C = cfg.channels, H = cfg.heads, dh = C / H, rows = T * N;
  const Vec ln1 = layer_norm_rows(x, C, P("ln1.gain"), P("ln1.bias"));
  const Vec qkv = affine(ln1, rows, P("attn.qkv.weight"), P("attn.qkv.bias"));
  Vec merged(rows * C, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t i = 0; i < N; ++i) {
        Vec s(N);
        double mx = -1e300;
        for (std::size_t j = 0; j < N; ++j) {
          double d = 0;
          for (std::size_t k = 0; k < dh; ++k) {
            d += qkv[(t * N + i) * 3 * C + h * dh + k] * qkv[(t * N + j) * 3 * C + C + h * dh + k];
          }
          s[j] = d / std::sqrt(static_cast<double>(dh));
          mx = std::max(mx, s[j]);
        }
        double z = 0;
        for (double& e : s) z += (e = std::exp(e - mx));
        for (std::size_t j = 0; j < N; ++j) {
          for (std::size_t k = 0; k < dh; ++k) {
            merged[(t * N + i) * C + h * dh + k] += s[j] / z * qkv[(t * N + j) * 3 * C + 2 * C + h * dh + k];
          }
        }
      }
    }
  }
  const Vec att = affine(merged, rows, P("attn.out.weight"), P("attn.out.bias"));
  Vec hidden(rows * C);
  for (std::size_t k = 0; k < hidden.size(); ++k) hidden[k] = x[k] + att[k];
  Vec e = affine(layer_norm_rows(hidden, C, P("ln2.gain"), P("ln2.bias")), rows,
                 P("mlp.fc1.weight"), P("mlp.fc1.bias"));
  for (double& v : e) v = 0.5 * v * (1.0 + std::tanh(0.7978845608028654 * (v + 0.044715 * v * v * v)));
  const Vec m = affine(e, rows, P("mlp.fc2.weight"), P("mlp.fc2.bias"));
  for (std::size_t k = 0; k < hidden.size(); ++k) hidden[k] += m[k];
  return hidden;
}

ParamMap jittered(const ModelConfig& cfg, std::uint64_t seed) {
  ParamMap p = init_params(cfg, seed);
  std::mt19937_64 gen(seed + 1000);
  std::normal_distribution<double> d(0.0, 0.1);
  for (auto& [k, v] : p) {
    for (double& x : v.mutable_data()) x += d(gen);
  }
  return p;
}

TEST(StageForward, MatchesLoopReferenceWithoutExchange) {
  ModelConfig cfg = small_config();
  cfg.bts_enabled = false;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ParamMap p = jittered(cfg, seed);
    std::mt19937_64 gen(seed);
    const Tensor x = randn(gen, {8, 4, 8});
    const Vec got = stage_forward(x, 0, 2, p, cfg, nullptr).values();
    const Vec want = reference_block(x.values(), 8, 4, p, cfg, 0, 2);
    for (std::size_t k = 0; k < got.size(); ++k) EXPECT_NEAR(got[k], want[k], 1e-12);
  }
}

TEST(StageForward, ZeroProjectionOnStaticClipEqualsPlainBlock) {
  ModelConfig cfg = small_config();
  cfg.projection_init = "zeros";
  const ParamMap p = init_params(cfg, 3);
  const auto s = cfg.schedule();
  std::mt19937_64 gen(3);
  const Tensor frame = randn(gen, {1, 4, 8});
  Vec v;
  for (int t = 0; t < 8; ++t) v.insert(v.end(), frame.data().begin(), frame.data().end());
  const Tensor x = Tensor::from({8, 4, 8}, v);
  EXPECT_EQ(stage_forward(x, 0, 1, p, cfg, &s).values(), stage_forward(x, 0, 1, p, cfg, nullptr).values());
}

TEST(StageForward, TemporalInfluenceFollowsPartners) {
  ModelConfig cfg = small_config();
  const ParamMap p = jittered(cfg, 4);
  const auto s = cfg.schedule();
  std::mt19937_64 gen(4);
  const Tensor x = randn(gen, {8, 4, 8});
  for (std::size_t stage = 1; stage <= 3; ++stage) {
    Tensor y = x.detach();
    const std::size_t f = 5;
    for (std::size_t k = 0; k < 32; ++k) y.mutable_data()[f * 32 + k] += 0.3;
    const Vec a = stage_forward(x, 0, stage, p, cfg, &s).values();
    const Vec b = stage_forward(y, 0, stage, p, cfg, &s).values();
    for (std::size_t t = 0; t < 8; ++t) {
      bool changed = false;
      for (std::size_t k = 0; k < 32; ++k) changed = changed || a[t * 32 + k] != b[t * 32 + k];
      EXPECT_EQ(changed, t == f || t == s.partner(0, stage, f)) << "stage " << stage << " t " << t;
    }
  }
}

TEST(Msa, GradCheck) {
  std::mt19937_64 gen(5);
  const Tensor w = randn(gen, {3, 4, 8});
  const auto rep = ad::grad_check(
      [&](const std::vector<Tensor>& in) {
        return ad::sum_all(msa(in[0], in[1], in[2], 2, in[3], in[4]) * w);
      },
      {randn(gen, {3, 4, 8}), randn(gen, {3, 4, 8}), randn(gen, {3, 4, 8}), randn(gen, {8, 8}, 0.3),
       randn(gen, {8})});
  EXPECT_LT(rep.max_rel_error, 1e-4);
}

TEST(Msa, RejectsIndivisibleHeads) {
  const Tensor q = Tensor::zeros({2, 3, 6});
  EXPECT_THROW(msa(q, q, q, 4, Tensor::zeros({6, 6}), Tensor::zeros({6})), ShapeError);
}

class PearsonIdentities : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(PearsonIdentities, Hold) {
  std::mt19937_64 gen(GetParam());
  const Tensor y = randn(gen, {64});
  Vec neg = y.values(), affine_v = y.values();
  for (double& v : neg) v = -v;
  for (double& v : affine_v) v = 3 * v + 7;
  EXPECT_NEAR(pearson_loss(y, y).item(), 0.0, 1e-9);
  EXPECT_NEAR(pearson_loss(Tensor::from({64}, neg), y).item(), 2.0, 1e-9);
  EXPECT_LT(std::abs(pearson_loss(Tensor::from({64}, affine_v), y).item()), 1e-9);
}

INSTANTIATE_TEST_SUITE_P(Seeds, PearsonIdentities, ::testing::Range<std::uint64_t>(0, 20));

TEST(Pearson, ConstantPredictionIsFinite) {
  const double l = pearson_loss(Tensor::full({16}, 2.0), Tensor::from({16}, Vec(16, 0.0))).item();
  EXPECT_DOUBLE_EQ(l, 1.0);
  EXPECT_THROW(pearson_loss(Tensor::zeros({4}), Tensor::zeros({5})), ShapeError);
  EXPECT_THROW(pearson_loss(Tensor::zeros({1}), Tensor::zeros({1})), ShapeError);
}

TEST(Pearson, GradCheck) {
  std::mt19937_64 gen(6);
  const auto rep = ad::grad_check(
      [](const std::vector<Tensor>& in) { return pearson_loss(in[0], in[1]); },
      {randn(gen, {16}), randn(gen, {16})});
  EXPECT_LT(rep.max_rel_error, 1e-4);
}

TEST(Init, DeterministicAndSeedSensitive) {
  const ModelConfig cfg;
  EXPECT_EQ(hash_params(init_params(cfg, 1)), hash_params(init_params(cfg, 1)));
  EXPECT_NE(hash_params(init_params(cfg, 1)), hash_params(init_params(cfg, 2)));
}

TEST(Init, SharedKeysMatchAcrossVariants) {
  ModelConfig a, b;
  b.variant = sched::Variant::kLocalOnly;
  const ParamMap pa = init_params(a, 9), pb = init_params(b, 9);
  EXPECT_EQ(hash_params(pa), hash_params(pb));
}

TEST(Init, ProjectionLayout) {
  ModelConfig cfg;
  cfg.clip_length = 192;
  const ParamMap p = init_params(cfg, 0);
  EXPECT_TRUE(p.contains(projection_key(cfg, 1, 6)));
  EXPECT_EQ(param(p, projection_key(cfg, 0, 1)).shape(), (ad::Shape{4, 2, 6}));
  cfg.share_projections = true;
  EXPECT_EQ(projection_key(cfg, 1, 6), projection_key(cfg, 0, 6));
  cfg.bts_enabled = false;
  EXPECT_FALSE(init_params(cfg, 0).contains(projection_key(cfg, 0, 1)));
  cfg.projection_init = "zeros";
  cfg.bts_enabled = true;
  const ParamMap zeros = init_params(cfg, 0);
  for (double v : param(zeros, projection_key(cfg, 0, 3)).data()) EXPECT_EQ(v, 0.0);
}

TEST(Config, JsonRoundTrip) {
  ModelConfig c = small_config();
  c.variant = sched::Variant::kReverseButterfly;
  c.share_projections = true;
  const ModelConfig d = ModelConfig::from_json(c.to_json());
  EXPECT_EQ(d.to_json(), c.to_json());
  EXPECT_EQ(d.variant, c.variant);
  EXPECT_THROW(ModelConfig::from_json("{\"clip_length\": 8}"), ValidationError);
}

TEST(Config, IncompatibleClipLength) {
  ModelConfig c;
  c.clip_length = 100;
  EXPECT_THROW(c.schedule(), sched::OutOfRangePairing);
  EXPECT_THROW(c.validate(), sched::OutOfRangePairing);
}

prep::VideoClip random_clip(std::mt19937_64& gen, const ModelConfig& cfg) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec v(cfg.clip_length * cfg.height * cfg.width * 3);
  for (double& x : v) x = u(gen);
  return {Tensor::from({cfg.clip_length, cfg.height, cfg.width, 3}, v), cfg.frame_rate};
}

TEST(Forward, ShapeAndMismatch) {
  const ModelConfig cfg = small_config();
  const ModelState st{cfg, {}, init_params(cfg, 0)};
  std::mt19937_64 gen(7);
  EXPECT_EQ(predict(random_clip(gen, cfg), st).samples.size(), 8u);
  ModelConfig other = cfg;
  other.clip_length = 16;
  EXPECT_THROW(predict(random_clip(gen, other), st), ShapeError);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const ModelConfig cfg = small_config();
  Checkpoint ck;
  ck.state = {cfg, {}, jittered(cfg, 11)};
  ck.state.norm.mean = {0.1, 0.2, 0.3, 0.01, -0.02, 1.0 / 3.0};
  ck.state.norm.stddev = {0.5, 0.6, 0.7, 0.05, 0.06, 0.07};
  ck.adam_m = jittered(cfg, 12);
  ck.adam_v = jittered(cfg, 13);
  ck.step = 4242;
  std::mt19937_64 shuffle(99);
  shuffle.discard(17);
  std::ostringstream rs;
  rs << shuffle;
  ck.rng_state = rs.str();

  const auto path = std::filesystem::temp_directory_path() / "bts_test_ckpt.bin";
  save_checkpoint(path.string(), ck);
  const Checkpoint back = load_checkpoint(path.string());
  std::filesystem::remove(path);

  EXPECT_EQ(back.step, 4242u);
  EXPECT_EQ(back.rng_state, ck.rng_state);
  EXPECT_EQ(back.state.config.to_json(), cfg.to_json());
  EXPECT_EQ(back.state.norm.mean, ck.state.norm.mean);
  EXPECT_EQ(back.state.norm.stddev, ck.state.norm.stddev);
  EXPECT_EQ(hash_params(back.state.params), hash_params(ck.state.params));
  EXPECT_EQ(hash_params(back.adam_m), hash_params(ck.adam_m));
  EXPECT_EQ(hash_params(back.adam_v), hash_params(ck.adam_v));
  std::mt19937_64 gen(8);
  for (int i = 0; i < 5; ++i) {
    const auto clip = random_clip(gen, cfg);
    EXPECT_EQ(predict(clip, back.state).samples, predict(clip, ck.state).samples);
  }
}

TEST(Checkpoint, RejectsMissingAndCorrupt) {
  EXPECT_THROW(load_checkpoint("/nonexistent/bts.bin"), IoError);
  const auto path = std::filesystem::temp_directory_path() / "bts_test_bad.bin";
  {
    std::ofstream f(path, std::ios::binary);
    f << "not a checkpoint";
  }
  EXPECT_ANY_THROW(load_checkpoint(path.string()));
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace bts::model
