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

// Input representation: RGB + normalized-difference frames, the 3D patch
// embedding, and the synthetic pulse-video generator that stands in for real
// face recordings.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bts/tensor.hpp"

namespace bts::prep {

inline constexpr double kNdfEps = 1e-6;
inline constexpr std::size_t kFusedChannels = 6;
inline constexpr double kMinPulseHz = 0.7;
inline constexpr double kMaxPulseHz = 3.0;

/// Frames [T, H, W, 3] with values in [0, 1].
struct VideoClip {
  ad::Tensor frames;
  double frame_rate = 30.0;

  std::size_t length() const { return frames.dim(0); }
  std::size_t height() const { return frames.dim(1); }
  std::size_t width() const { return frames.dim(2); }

  /// Throws ValidationError on bad shape, T < 2 or values outside [0, 1].
  void validate() const;
};

struct Waveform {
  std::vector<double> samples;
  double frame_rate = 30.0;
};

/// D_t = (X_{t+1} - X_t) / (X_{t+1} + X_t + eps), D_{T-1} = 0.
ad::Tensor compute_ndf(const VideoClip& clip);

/// [T, H, W, 6]: RGB then NDF.
ad::Tensor fuse_channels(const VideoClip& clip, const ad::Tensor& ndf);

/// Fixed per-channel standardization applied before the embedding.
struct InputNorm {
  std::array<double, kFusedChannels> mean{};
  std::array<double, kFusedChannels> stddev{1, 1, 1, 1, 1, 1};
};

/// Per-channel statistics over a set of fused inputs.
InputNorm fit_input_norm(const std::vector<ad::Tensor>& fused);

/// Learnable embedding parameters.
///   weight [3 * p * p * 6, C0]  temporal kernel 3, spatial p x p patch
///   bias   [C0]
///   pos    [N, C0]              per-token-position embedding
struct PatchEmbedParams {
  ad::Tensor weight;
  ad::Tensor bias;
  ad::Tensor pos;
};

std::size_t patch_feature_width(std::size_t patch);

/// Standardized patch columns [T, N, 3 * p * p * 6]. Token n = py * (W/p) + px;
/// features ordered (dt in -1..1, dy, dx, channel); out-of-clip frames are zero.
ad::Tensor patch_columns(const ad::Tensor& fused, std::size_t patch,
                         const InputNorm& norm);

/// Tokens [T, N, C0]. Throws ShapeError when H or W is not divisible by p.
ad::Tensor patch_embed(const ad::Tensor& fused, std::size_t patch,
                       const InputNorm& norm, const PatchEmbedParams& params);

/// Mirrors the clip along the width axis.
VideoClip flip_horizontal(const VideoClip& clip);

struct SynthParams {
  double pulse_frequency = 1.2;  // Hz
  double amplitude = 0.02;
  double noise_std = 0.01;
  double motion_amplitude = 0.02;
  double baseline = 0.5;
  std::uint64_t seed = 0;

  /// Throws ValidationError when the pulse leaves [0.7, 3.0] Hz or a
  /// magnitude is negative.
  void validate() const;
};

struct SynthGeometry {
  std::size_t frames = 64;
  std::size_t height = 8;
  std::size_t width = 8;
  double frame_rate = 30.0;
};

/// Pulse video and its clean reference sinusoid; deterministic in the seed.
std::pair<VideoClip, Waveform> synth_clip(const SynthParams& params,
                                          const SynthGeometry& geometry);

/// Half-open [start, start + window) ranges. Throws ValidationError when
/// M < window or stride == 0.
std::vector<std::pair<std::size_t, std::size_t>> sliding_windows(
    std::size_t sequence_length, std::size_t window = 192,
    std::size_t stride = 96);

VideoClip slice_clip(const VideoClip& clip, std::size_t begin, std::size_t end);
Waveform slice_waveform(const Waveform& w, std::size_t begin, std::size_t end);

struct ManifestRow {
  std::string clip_id;
  std::uint64_t seed = 0;
  double pulse_frequency_hz = 1.2;
  double noise_std = 0.01;
  double motion_amplitude = 0.02;
  std::string split;  // train | val | test
};

/// Columns: clip_id,seed,pulse_frequency_hz,noise_std,motion_amplitude,split
void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest(const std::string& path);

}  // namespace bts::prep
