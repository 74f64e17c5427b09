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

#include "bts/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "bts/error.hpp"
#include "bts/ops.hpp"

namespace bts::prep {

void VideoClip::validate() const {
  if (!frames.defined() || frames.rank() != 4 || frames.dim(3) != 3) {
    throw ValidationError("video clip must be [T, H, W, 3]");
  }
  if (frames.dim(0) < 2) throw ValidationError("video clip needs T >= 2");
  for (double v : frames.data()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ValidationError("video clip values must lie in [0, 1]");
    }
  }
}

ad::Tensor compute_ndf(const VideoClip& clip) {
  clip.validate();
  const std::size_t T = clip.length();
  const std::size_t frame = clip.frames.numel() / T;
  const auto x = clip.frames.data();
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t t = 0; t + 1 < T; ++t) {
    for (std::size_t i = 0; i < frame; ++i) {
      const double a = x[t * frame + i];
      const double b = x[(t + 1) * frame + i];
      out[t * frame + i] = (b - a) / (b + a + kNdfEps);
    }
  }
  return ad::Tensor::from(clip.frames.shape(), std::move(out));
}

ad::Tensor fuse_channels(const VideoClip& clip, const ad::Tensor& ndf) {
  if (ndf.shape() != clip.frames.shape()) {
    throw ShapeError("fuse_channels: clip " + ad::shape_str(clip.frames.shape()) +
                     " vs ndf " + ad::shape_str(ndf.shape()));
  }
  return ad::concat({clip.frames, ndf}, 3);
}

InputNorm fit_input_norm(const std::vector<ad::Tensor>& fused) {
  InputNorm norm;
  std::array<double, kFusedChannels> sum{}, sq{};
  double count = 0.0;
  for (const auto& z : fused) {
    if (z.rank() != 4 || z.dim(3) != kFusedChannels) {
      throw ShapeError("fit_input_norm: expected [T, H, W, 6]");
    }
    const auto v = z.data();
    for (std::size_t i = 0; i < v.size(); i += kFusedChannels) {
      for (std::size_t c = 0; c < kFusedChannels; ++c) {
        sum[c] += v[i + c];
        sq[c] += v[i + c] * v[i + c];
      }
      count += 1.0;
    }
  }
  if (count == 0.0) return norm;
  for (std::size_t c = 0; c < kFusedChannels; ++c) {
    const double mu = sum[c] / count;
    const double var = std::max(sq[c] / count - mu * mu, 0.0);
    norm.mean[c] = mu;
    // Constant channels keep unit scale.
    norm.stddev[c] = var > 1e-12 ? std::sqrt(var) : 1.0;
  }
  return norm;
}

std::size_t patch_feature_width(std::size_t patch) {
  return 3 * patch * patch * kFusedChannels;
}

ad::Tensor patch_columns(const ad::Tensor& fused, std::size_t patch,
                         const InputNorm& norm) {
  if (fused.rank() != 4 || fused.dim(3) != kFusedChannels) {
    throw ShapeError("patch_embed: expected [T, H, W, 6], got " +
                     ad::shape_str(fused.shape()));
  }
  const std::size_t T = fused.dim(0), H = fused.dim(1), W = fused.dim(2);
  if (patch == 0 || H % patch != 0 || W % patch != 0) {
    throw ShapeError("patch_embed: H=" + std::to_string(H) + ", W=" +
                     std::to_string(W) + " not divisible by patch " +
                     std::to_string(patch));
  }
  const std::size_t gw = W / patch;
  const std::size_t N = (H / patch) * gw;
  const std::size_t F = patch_feature_width(patch);
  const auto z = fused.data();
  std::vector<double> cols(T * N * F, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t py = n / gw, px = n % gw;
      double* dst = cols.data() + (t * N + n) * F;
      std::size_t f = 0;
      for (int dt = -1; dt <= 1; ++dt) {
        const long src_t = static_cast<long>(t) + dt;
        const bool inside = src_t >= 0 && src_t < static_cast<long>(T);
        for (std::size_t dy = 0; dy < patch; ++dy) {
          for (std::size_t dx = 0; dx < patch; ++dx) {
            const std::size_t y = py * patch + dy, x = px * patch + dx;
            for (std::size_t c = 0; c < kFusedChannels; ++c, ++f) {
              if (!inside) continue;
              const double v =
                  z[((static_cast<std::size_t>(src_t) * H + y) * W + x) * kFusedChannels + c];
              dst[f] = (v - norm.mean[c]) / norm.stddev[c];
            }
          }
        }
      }
    }
  }
  return ad::Tensor::from({T, N, F}, std::move(cols));
}

ad::Tensor patch_embed(const ad::Tensor& fused, std::size_t patch,
                       const InputNorm& norm, const PatchEmbedParams& params) {
  ad::Tensor cols = patch_columns(fused, patch, norm);
  const std::size_t T = cols.dim(0), N = cols.dim(1);
  if (params.pos.rank() != 2 || params.pos.dim(0) != N) {
    throw ShapeError("patch_embed: positional table " +
                     ad::shape_str(params.pos.shape()) + " does not cover " +
                     std::to_string(N) + " tokens");
  }
  const std::size_t C = params.pos.dim(1);
  ad::Tensor tokens = ad::linear(cols, params.weight, params.bias);
  std::vector<std::size_t> rows(T * N);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i % N;
  ad::Tensor pos = ad::reshape(ad::take_rows(params.pos, rows), {T, N, C});
  return ad::add(tokens, pos);
}

VideoClip flip_horizontal(const VideoClip& clip) {
  const std::size_t T = clip.length(), H = clip.height(), W = clip.width();
  const auto x = clip.frames.data();
  std::vector<double> out(x.size());
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t w = 0; w < W; ++w) {
        for (std::size_t c = 0; c < 3; ++c) {
          out[((t * H + y) * W + w) * 3 + c] = x[((t * H + y) * W + (W - 1 - w)) * 3 + c];
        }
      }
    }
  }
  return {ad::Tensor::from(clip.frames.shape(), std::move(out)), clip.frame_rate};
}

void SynthParams::validate() const {
  if (!(pulse_frequency >= kMinPulseHz && pulse_frequency <= kMaxPulseHz)) {
    throw ValidationError("pulse frequency " + std::to_string(pulse_frequency) +
                          " Hz outside [0.7, 3.0]");
  }
  if (!(amplitude >= 0.0) || !(noise_std >= 0.0) || !(motion_amplitude >= 0.0)) {
    throw ValidationError("synthetic amplitudes and noise must be non-negative");
  }
  if (!(baseline >= 0.0 && baseline <= 1.0)) {
    throw ValidationError("baseline brightness must lie in [0, 1]");
  }
}

std::pair<VideoClip, Waveform> synth_clip(const SynthParams& params,
                                          const SynthGeometry& geometry) {
  params.validate();
  const std::size_t T = geometry.frames, H = geometry.height, W = geometry.width;
  if (T < 2 || H == 0 || W == 0 || !(geometry.frame_rate > 0.0)) {
    throw ValidationError("synthetic geometry needs T >= 2, H, W >= 1, fs > 0");
  }
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double phase = kTwoPi * unit(rng);
  const double drift_hz = 0.05 + 0.25 * unit(rng);
  const double drift_phase = kTwoPi * unit(rng);

  // Skin-like channel balance; the pulse is strongest in green.
  constexpr std::array<double, 3> kBase{1.1, 0.85, 0.7};
  constexpr std::array<double, 3> kPulse{0.35, 1.0, 0.6};

  const double cy = 0.5 * static_cast<double>(H - 1);
  const double cx = 0.5 * static_cast<double>(W - 1);
  const double sigma = 0.35 * static_cast<double>(std::max(H, W));
  std::vector<double> mask(H * W), illum(W);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      const double dy = static_cast<double>(y) - cy;
      const double dx = static_cast<double>(x) - cx;
      mask[y * W + x] = 0.6 + 0.4 * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
    }
  }
  for (std::size_t x = 0; x < W; ++x) {
    illum[x] = 0.5 + (W > 1 ? static_cast<double>(x) / static_cast<double>(W - 1) : 0.5);
  }

  Waveform wave;
  wave.frame_rate = geometry.frame_rate;
  wave.samples.resize(T);
  std::vector<double> pixels(T * H * W * 3);
  for (std::size_t t = 0; t < T; ++t) {
    const double time = static_cast<double>(t) / geometry.frame_rate;
    const double pulse = std::sin(kTwoPi * params.pulse_frequency * time + phase);
    const double drift = params.motion_amplitude * std::sin(kTwoPi * drift_hz * time + drift_phase);
    wave.samples[t] = pulse;
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        for (std::size_t c = 0; c < 3; ++c) {
          double v = params.baseline * kBase[c] +
                     params.amplitude * kPulse[c] * pulse * mask[y * W + x] +
                     drift * illum[x];
          if (params.noise_std > 0.0) v += params.noise_std * gauss(rng);
          pixels[((t * H + y) * W + x) * 3 + c] = std::clamp(v, 0.0, 1.0);
        }
      }
    }
  }
  VideoClip clip{ad::Tensor::from({T, H, W, 3}, std::move(pixels)), geometry.frame_rate};
  return {std::move(clip), std::move(wave)};
}

std::vector<std::pair<std::size_t, std::size_t>> sliding_windows(
    std::size_t sequence_length, std::size_t window, std::size_t stride) {
  if (window == 0 || stride == 0) {
    throw ValidationError("sliding_windows: window and stride must be positive");
  }
  if (sequence_length < window) {
    throw ValidationError("sliding_windows: sequence of " +
                          std::to_string(sequence_length) +
                          " frames is shorter than window " + std::to_string(window));
  }
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t s = 0; s + window <= sequence_length; s += stride) {
    out.emplace_back(s, s + window);
  }
  return out;
}

VideoClip slice_clip(const VideoClip& clip, std::size_t begin, std::size_t end) {
  if (begin >= end || end > clip.length()) throw ValidationError("slice_clip: bad range");
  const std::size_t frame = clip.frames.numel() / clip.length();
  const auto x = clip.frames.data();
  std::vector<double> out(x.begin() + static_cast<std::ptrdiff_t>(begin * frame),
                          x.begin() + static_cast<std::ptrdiff_t>(end * frame));
  ad::Shape shape = clip.frames.shape();
  shape[0] = end - begin;
  return {ad::Tensor::from(std::move(shape), std::move(out)), clip.frame_rate};
}

Waveform slice_waveform(const Waveform& w, std::size_t begin, std::size_t end) {
  if (begin >= end || end > w.samples.size()) {
    throw ValidationError("slice_waveform: bad range");
  }
  return {std::vector<double>(w.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                              w.samples.begin() + static_cast<std::ptrdiff_t>(end)),
          w.frame_rate};
}

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write manifest " + path);
  os << "clip_id,seed,pulse_frequency_hz,noise_std,motion_amplitude,split\n";
  for (const auto& r : rows) {
    os << r.clip_id << ',' << r.seed << ',' << format_double(r.pulse_frequency_hz)
       << ',' << format_double(r.noise_std) << ','
       << format_double(r.motion_amplitude) << ',' << r.split << '\n';
  }
}

std::vector<ManifestRow> read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read manifest " + path);
  std::string line;
  if (!std::getline(is, line) ||
      line != "clip_id,seed,pulse_frequency_hz,noise_std,motion_amplitude,split") {
    throw ValidationError("manifest " + path + " has an unexpected header");
  }
  std::vector<ManifestRow> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 6) {
      throw ValidationError("manifest line " + std::to_string(lineno) + ": expected 6 columns");
    }
    ManifestRow r;
    try {
      r.clip_id = cells[0];
      r.seed = std::stoull(cells[1]);
      r.pulse_frequency_hz = std::stod(cells[2]);
      r.noise_std = std::stod(cells[3]);
      r.motion_amplitude = std::stod(cells[4]);
      r.split = cells[5];
    } catch (const std::logic_error&) {
      throw ValidationError("manifest line " + std::to_string(lineno) + ": bad number");
    }
    if (r.split != "train" && r.split != "val" && r.split != "test") {
      throw ValidationError("manifest line " + std::to_string(lineno) +
                            ": unknown split '" + r.split + "'");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace bts::prep
