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

#include "bts/model.hpp"

#include <cmath>
#include <cstring>
#include <random>

#include <json.hpp>

#include "bts/error.hpp"
#include "bts/ops.hpp"

namespace bts::model {

using nlohmann::json;

std::vector<std::size_t> ModelConfig::resolved_cycles() const {
  return cycles.empty() ? sched::default_cycles(clip_length) : cycles;
}

oft::OftConfig ModelConfig::oft_config() const {
  return oft::OftConfig::from_ratio(channels, heads, fold_ratio);
}

sched::ButterflySchedule ModelConfig::schedule() const {
  return sched::ButterflySchedule::build(variant, stages, clip_length,
                                         resolved_cycles());
}

void ModelConfig::validate() const {
  if (clip_length < 2) throw ValidationError("model.clip_length must be >= 2");
  if (patch == 0 || height % patch != 0 || width % patch != 0) {
    throw ValidationError("model.height/width must be divisible by model.patch");
  }
  if (stages < 1) throw ValidationError("model.stages must be >= 1");
  if (mlp_ratio < 1) throw ValidationError("model.mlp_ratio must be >= 1");
  if (!(frame_rate > 0.0)) throw ValidationError("model.frame_rate must be positive");
  if (projection_init != "xavier" && projection_init != "zeros") {
    throw ValidationError("model.projection_init must be 'xavier' or 'zeros'");
  }
  oft_config();
  schedule();
}

std::string ModelConfig::to_json() const {
  json j;
  j["clip_length"] = clip_length;
  j["height"] = height;
  j["width"] = width;
  j["patch"] = patch;
  j["channels"] = channels;
  j["heads"] = heads;
  j["stages"] = stages;
  j["mlp_ratio"] = mlp_ratio;
  j["fold_ratio"] = fold_ratio;
  j["frame_rate"] = frame_rate;
  j["variant"] = sched::to_string(variant);
  j["cycles"] = resolved_cycles();
  j["bts_enabled"] = bts_enabled;
  j["share_projections"] = share_projections;
  j["projection_init"] = projection_init;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  ModelConfig c;
  try {
    const json j = json::parse(text);
    c.clip_length = j.at("clip_length").get<std::size_t>();
    c.height = j.at("height").get<std::size_t>();
    c.width = j.at("width").get<std::size_t>();
    c.patch = j.at("patch").get<std::size_t>();
    c.channels = j.at("channels").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.stages = j.at("stages").get<std::size_t>();
    c.mlp_ratio = j.at("mlp_ratio").get<std::size_t>();
    c.fold_ratio = j.at("fold_ratio").get<double>();
    c.frame_rate = j.at("frame_rate").get<double>();
    c.variant = sched::parse_variant(j.at("variant").get<std::string>());
    c.cycles = j.at("cycles").get<std::vector<std::size_t>>();
    c.bts_enabled = j.at("bts_enabled").get<bool>();
    c.share_projections = j.at("share_projections").get<bool>();
    c.projection_init = j.at("projection_init").get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model config snapshot: ") + e.what());
  }
  return c;
}

std::string block_key(std::size_t cycle, std::size_t stage, const std::string& name) {
  return "blk" + std::to_string(cycle) + "." + std::to_string(stage) + "." + name;
}

std::string projection_key(const ModelConfig& cfg, std::size_t cycle, std::size_t stage) {
  return block_key(cfg.share_projections ? 0 : cycle, stage, "bts.proj");
}

namespace {

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

constexpr std::uint64_t kFnvBasis = 14695981039346656037ULL;

ad::Tensor uniform(const std::string& key, std::uint64_t seed, ad::Shape shape,
                   double bound) {
  const std::uint64_t s = fnv1a(key.data(), key.size(), fnv1a(&seed, sizeof(seed), kFnvBasis));
  std::mt19937_64 rng(s);
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(ad::shape_numel(shape));
  for (double& x : v) x = dist(rng);
  return ad::Tensor::from(std::move(shape), std::move(v));
}

ad::Tensor xavier(const std::string& key, std::uint64_t seed, ad::Shape shape,
                  std::size_t fan_in, std::size_t fan_out) {
  return uniform(key, seed, std::move(shape),
                 std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)));
}

}  // namespace

ParamMap init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t C = cfg.channels;
  const std::size_t F = prep::patch_feature_width(cfg.patch);
  const std::size_t N = cfg.tokens();
  const std::size_t E = C * cfg.mlp_ratio;
  const oft::OftConfig oc = cfg.oft_config();
  ParamMap p;
  p["embed.weight"] = xavier("embed.weight", seed, {F, C}, F, C);
  p["embed.bias"] = ad::Tensor::zeros({C});
  p["embed.pos"] = uniform("embed.pos", seed, {N, C}, 0.02);
  for (std::size_t c = 0; c < cfg.resolved_cycles().size(); ++c) {
    for (std::size_t l = 1; l <= cfg.stages; ++l) {
      auto key = [&](const std::string& name) { return block_key(c, l, name); };
      p[key("ln1.gain")] = ad::Tensor::full({C}, 1.0);
      p[key("ln1.bias")] = ad::Tensor::zeros({C});
      p[key("attn.qkv.weight")] = xavier(key("attn.qkv.weight"), seed, {C, 3 * C}, C, 3 * C);
      p[key("attn.qkv.bias")] = ad::Tensor::zeros({3 * C});
      p[key("attn.out.weight")] = xavier(key("attn.out.weight"), seed, {C, C}, C, C);
      p[key("attn.out.bias")] = ad::Tensor::zeros({C});
      p[key("ln2.gain")] = ad::Tensor::full({C}, 1.0);
      p[key("ln2.bias")] = ad::Tensor::zeros({C});
      p[key("mlp.fc1.weight")] = xavier(key("mlp.fc1.weight"), seed, {C, E}, C, E);
      p[key("mlp.fc1.bias")] = ad::Tensor::zeros({E});
      p[key("mlp.fc2.weight")] = xavier(key("mlp.fc2.weight"), seed, {E, C}, E, C);
      p[key("mlp.fc2.bias")] = ad::Tensor::zeros({C});
      const std::string pk = projection_key(cfg, c, l);
      if (cfg.bts_enabled && !p.contains(pk)) {
        p[pk] = cfg.projection_init == "zeros"
                    ? ad::Tensor::zeros(oc.projection_shape())
                    : xavier(pk, seed, oc.projection_shape(), oc.retained_width(),
                             oc.fold_width);
      }
    }
  }
  p["head.weight"] = xavier("head.weight", seed, {C, 1}, C, 1);
  p["head.bias"] = ad::Tensor::zeros({1});
  return p;
}

ParamMap bind_leaves(const ParamMap& params) {
  ParamMap out;
  for (const auto& [k, v] : params) out.emplace(k, v.detach(true));
  return out;
}

std::uint64_t hash_params(const ParamMap& params) {
  std::uint64_t h = kFnvBasis;
  for (const auto& [k, v] : params) {
    h = fnv1a(k.data(), k.size(), h);
    for (std::size_t e : v.shape()) h = fnv1a(&e, sizeof(e), h);
    h = fnv1a(v.data().data(), v.numel() * sizeof(double), h);
  }
  return h;
}

const ad::Tensor& param(const ParamMap& params, const std::string& key) {
  auto it = params.find(key);
  if (it == params.end()) throw ValidationError("missing parameter '" + key + "'");
  return it->second;
}

ad::Tensor msa(const ad::Tensor& q, const ad::Tensor& k, const ad::Tensor& v,
               std::size_t heads, const ad::Tensor& out_weight,
               const ad::Tensor& out_bias) {
  if (q.rank() != 3 || q.shape() != k.shape() || q.shape() != v.shape()) {
    throw ShapeError("msa: Q, K, V must share a [T, N, C] shape");
  }
  const std::size_t T = q.dim(0), N = q.dim(1), C = q.dim(2);
  if (heads == 0 || C % heads != 0) {
    throw ShapeError("msa: channels not divisible by heads");
  }
  const std::size_t dh = C / heads;
  auto split_heads = [&](const ad::Tensor& x) {
    return ad::reshape(ad::permute(ad::reshape(x, {T, N, heads, dh}), {0, 2, 1, 3}),
                       {T * heads, N, dh});
  };
  ad::Tensor qh = split_heads(q);
  ad::Tensor kt = ad::permute(split_heads(k), {0, 2, 1});
  ad::Tensor vh = split_heads(v);
  ad::Tensor scores = ad::matmul(qh, kt) * (1.0 / std::sqrt(static_cast<double>(dh)));
  ad::Tensor weights = ad::softmax_lastaxis(scores);
  ad::Tensor ctx = ad::matmul(weights, vh);  // [T*H, N, dh]
  ad::Tensor merged =
      ad::reshape(ad::permute(ad::reshape(ctx, {T, heads, N, dh}), {0, 2, 1, 3}), {T, N, C});
  return ad::linear(merged, out_weight, out_bias);
}

ad::Tensor stage_forward(const ad::Tensor& features, std::size_t cycle,
                         std::size_t stage, const ParamMap& params,
                         const ModelConfig& cfg,
                         const sched::ButterflySchedule* schedule) {
  if (features.rank() != 3 || features.dim(2) != cfg.channels) {
    throw ShapeError("stage_forward: features " + ad::shape_str(features.shape()) +
                     " do not match channel width " + std::to_string(cfg.channels));
  }
  auto p = [&](const std::string& name) -> const ad::Tensor& {
    return param(params, block_key(cycle, stage, name));
  };
  const std::size_t T = features.dim(0), N = features.dim(1), C = cfg.channels;

  // Window formation is the identity: one window holds the N tokens of a frame.
  ad::Tensor windows = ad::layer_norm(features, p("ln1.gain"), p("ln1.bias"));
  ad::Tensor exchanged = windows;
  if (cfg.bts_enabled && schedule != nullptr) {
    exchanged = oft::bts_apply(windows, *schedule, cycle, stage,
                               param(params, projection_key(cfg, cycle, stage)),
                               cfg.oft_config());
  }
  ad::Tensor qkv = ad::linear(exchanged, p("attn.qkv.weight"), p("attn.qkv.bias"));
  auto parts = ad::split(qkv, 2, {C, C, C});
  ad::Tensor attended =
      msa(parts[0], parts[1], parts[2], cfg.heads, p("attn.out.weight"), p("attn.out.bias"));
  ad::Tensor hidden = ad::add(features, attended);

  ad::Tensor normed = ad::layer_norm(hidden, p("ln2.gain"), p("ln2.bias"));
  ad::Tensor expanded = ad::gelu(ad::linear(normed, p("mlp.fc1.weight"), p("mlp.fc1.bias")));
  ad::Tensor mlp_out = ad::linear(expanded, p("mlp.fc2.weight"), p("mlp.fc2.bias"));
  ad::Tensor out = ad::add(hidden, mlp_out);
  if (out.dim(0) != T || out.dim(1) != N) throw ShapeError("stage_forward: extent changed");
  return out;
}

ad::Tensor predictor_head(const ad::Tensor& features, const ad::Tensor& weight,
                          const ad::Tensor& bias) {
  if (features.rank() != 3) {
    throw ShapeError("predictor_head: expected [T, N, C], got " +
                     ad::shape_str(features.shape()));
  }
  ad::Tensor pooled = ad::mean(features, 1);  // [T, C]
  ad::Tensor y = ad::linear(pooled, weight, bias);  // [T, 1]
  return ad::reshape(y, {features.dim(0)});
}

ad::Tensor pearson_loss(const ad::Tensor& prediction, const ad::Tensor& target) {
  if (prediction.rank() != 1 || prediction.shape() != target.shape()) {
    throw ShapeError("pearson_loss: length mismatch " + ad::shape_str(prediction.shape()) +
                     " vs " + ad::shape_str(target.shape()));
  }
  if (prediction.numel() < 2) throw ShapeError("pearson_loss: needs length >= 2");
  ad::Tensor pc = ad::sub(prediction, ad::mean(prediction, 0));
  ad::Tensor tc = ad::sub(target, ad::mean(target, 0));
  ad::Tensor cov = ad::sum_all(ad::mul(pc, tc));
  ad::Tensor sp = ad::sqrt(ad::sum_all(ad::square(pc)) + kPearsonEps);
  ad::Tensor st = ad::sqrt(ad::sum_all(ad::square(tc)) + kPearsonEps);
  return 1.0 - ad::div(cov, ad::mul(sp, st));
}

ad::Tensor embed(const prep::VideoClip& clip, const ParamMap& params,
                 const ModelConfig& cfg, const prep::InputNorm& norm) {
  if (clip.frames.rank() != 4 || clip.length() != cfg.clip_length ||
      clip.height() != cfg.height || clip.width() != cfg.width) {
    throw ShapeError("clip " + ad::shape_str(clip.frames.shape()) +
                     " does not match model geometry T=" +
                     std::to_string(cfg.clip_length) + ", H=" + std::to_string(cfg.height) +
                     ", W=" + std::to_string(cfg.width));
  }
  const ad::Tensor fused = prep::fuse_channels(clip, prep::compute_ndf(clip));
  return prep::patch_embed(fused, cfg.patch, norm,
                           {param(params, "embed.weight"), param(params, "embed.bias"),
                            param(params, "embed.pos")});
}

ad::Tensor model_forward(const prep::VideoClip& clip, const ParamMap& params,
                         const ModelConfig& cfg, const prep::InputNorm& norm) {
  const sched::ButterflySchedule schedule = cfg.schedule();
  ad::Tensor x = embed(clip, params, cfg, norm);
  for (std::size_t c = 0; c < schedule.num_cycles(); ++c) {
    for (std::size_t l = 1; l <= schedule.stages(); ++l) {
      x = stage_forward(x, c, l, params, cfg, &schedule);
    }
  }
  return predictor_head(x, param(params, "head.weight"), param(params, "head.bias"));
}

prep::Waveform predict(const prep::VideoClip& clip, const ModelState& state) {
  ad::NoGradScope no_grad;
  ad::Tensor y = model_forward(clip, state.params, state.config, state.norm);
  return {y.values(), clip.frame_rate};
}

}  // namespace bts::model
