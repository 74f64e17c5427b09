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

// The BTS attention backbone.
//
// Per stage: LN -> window tokens (one window = all N tokens of a frame) ->
// butterfly exchange -> fused QKV -> per-frame multi-head attention ->
// residual -> LN -> GELU MLP -> residual. Every temporal interaction between
// frames after the embedding goes through the butterfly exchange.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bts/bts_oft.hpp"
#include "bts/preprocess.hpp"
#include "bts/schedule.hpp"
#include "bts/tensor.hpp"

namespace bts::model {

inline constexpr double kPearsonEps = 1e-8;

struct ModelConfig {
  std::size_t clip_length = 64;
  std::size_t height = 8;
  std::size_t width = 8;
  std::size_t patch = 4;
  std::size_t channels = 32;
  std::size_t heads = 4;
  std::size_t stages = 6;
  std::size_t mlp_ratio = 4;
  double fold_ratio = 0.25;
  double frame_rate = 30.0;
  sched::Variant variant = sched::Variant::kButterfly;
  // Rotation per cycle; empty selects sched::default_cycles(clip_length).
  std::vector<std::size_t> cycles;
  // false replaces every butterfly exchange with the identity.
  bool bts_enabled = true;
  // One projection set per stage, reused by every cycle.
  bool share_projections = false;
  // "xavier" or "zeros".
  std::string projection_init = "xavier";

  std::size_t tokens() const { return (height / patch) * (width / patch); }
  std::vector<std::size_t> resolved_cycles() const;
  oft::OftConfig oft_config() const;
  /// Throws OutOfRangePairing for incompatible (T, variant, stages).
  sched::ButterflySchedule schedule() const;
  /// Throws ValidationError / ShapeError on inconsistent geometry.
  void validate() const;

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

/// Tensors keyed by name; std::map keeps iteration order stable.
using ParamMap = std::map<std::string, ad::Tensor>;

struct ModelState {
  ModelConfig config;
  prep::InputNorm norm;
  ParamMap params;
};

std::string block_key(std::size_t cycle, std::size_t stage, const std::string& name);
/// Key of the OFT projection used at (cycle, stage), honoring sharing.
std::string projection_key(const ModelConfig& cfg, std::size_t cycle, std::size_t stage);

/// Deterministic initialization. Each tensor draws from its own generator
/// seeded by (seed, key), so tensors with equal keys and shapes start equal
/// across configurations.
ParamMap init_params(const ModelConfig& cfg, std::uint64_t seed);

/// Copies every parameter into a fresh grad-requiring leaf.
ParamMap bind_leaves(const ParamMap& params);

/// 64-bit FNV-1a over keys, shapes and raw values.
std::uint64_t hash_params(const ParamMap& params);

const ad::Tensor& param(const ParamMap& params, const std::string& key);

/// softmax(Q K^T / sqrt(d)) V per frame and head over the N tokens of the
/// frame, heads concatenated, then the output projection. Q, K, V: [T, N, C].
ad::Tensor msa(const ad::Tensor& q, const ad::Tensor& k, const ad::Tensor& v,
               std::size_t heads, const ad::Tensor& out_weight,
               const ad::Tensor& out_bias);

/// One backbone stage; `schedule` may be null for an identity exchange.
ad::Tensor stage_forward(const ad::Tensor& features, std::size_t cycle,
                         std::size_t stage, const ParamMap& params,
                         const ModelConfig& cfg,
                         const sched::ButterflySchedule* schedule);

/// Global average over tokens, then a per-frame linear map to a scalar: [T].
ad::Tensor predictor_head(const ad::Tensor& features, const ad::Tensor& weight,
                          const ad::Tensor& bias);

/// 1 - Pearson r with kPearsonEps inside each root.
ad::Tensor pearson_loss(const ad::Tensor& prediction, const ad::Tensor& target);

/// Embedded tokens F^(0) for a clip.
ad::Tensor embed(const prep::VideoClip& clip, const ParamMap& params,
                 const ModelConfig& cfg, const prep::InputNorm& norm);

/// Full network on a clip; returns the predicted waveform [T].
ad::Tensor model_forward(const prep::VideoClip& clip, const ParamMap& params,
                         const ModelConfig& cfg, const prep::InputNorm& norm);

/// Inference without recording.
prep::Waveform predict(const prep::VideoClip& clip, const ModelState& state);

}  // namespace bts::model
