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

// Heart-rate estimation, error metrics, a POS reference extractor and the
// ablation harness.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bts/error.hpp"
#include "bts/model.hpp"
#include "bts/preprocess.hpp"
#include "bts/train.hpp"

namespace bts::eval {

inline constexpr std::size_t kMinFftSize = 2048;

/// Raised when a waveform has no in-band power (e.g. constant input).
class NoPeakError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

struct HrEstimate {
  double bpm = 0.0;
  double peak_frequency = 0.0;
  // (frequency Hz, power) for every bin inside the band.
  std::vector<std::pair<double, double>> spectrum;
};

/// Mean removal, Hann window, zero padding to max(2048, next power of two),
/// then the strongest bin inside [band_lo, band_hi] Hz.
HrEstimate estimate_hr(const prep::Waveform& wave, double band_lo = prep::kMinPulseHz,
                       double band_hi = prep::kMaxPulseHz);

/// Spectral resolution of estimate_hr for a given length, in Hz.
double hr_bin_width(std::size_t length, double frame_rate);

struct MetricsReport {
  double mae = 0.0;
  double mape = 0.0;  // percent
  double rmse = 0.0;
  // Unset for fewer than two pairs or a constant list.
  std::optional<double> pearson;
};

MetricsReport compute_metrics(std::span<const double> pred_bpm,
                              std::span<const double> gt_bpm);

/// Plane-orthogonal-to-skin pulse extraction with 1.6 s overlap-add windows.
/// `rgb` holds the spatially averaged trace, one {R, G, B} triple per frame.
prep::Waveform pos_baseline(const std::vector<std::array<double, 3>>& rgb,
                            double frame_rate);

std::vector<std::array<double, 3>> spatial_mean_trace(const prep::VideoClip& clip);

struct ClipResult {
  std::string id;
  double pred_bpm = 0.0;
  double gt_bpm = 0.0;
  double loss = 0.0;
  prep::Waveform prediction;
  prep::Waveform target;
};

struct EvalResult {
  std::vector<ClipResult> clips;
  MetricsReport metrics;
  double mean_loss = 0.0;
};

/// Predicts every sample and scores HR against the estimator applied to the
/// reference waveform.
EvalResult evaluate(const model::ModelState& state,
                    const std::vector<model::Sample>& samples);

struct AblationVariant {
  std::string name;
  model::ModelConfig config;
};

/// Local-only, linear, reverse-butterfly, butterfly; everything else from base.
std::vector<AblationVariant> schedule_variants(const model::ModelConfig& base);
/// rho in {1/8, 1/4, 3/8, 1/2}.
std::vector<AblationVariant> fold_ratio_variants(const model::ModelConfig& base);

struct AblationRun {
  std::string variant;
  std::uint64_t seed = 0;
  std::uint64_t init_hash = 0;
  double final_train_loss = 0.0;
  double test_loss = 0.0;
  MetricsReport metrics;
};

struct AblationSummary {
  std::string variant;
  std::size_t runs = 0;
  double rmse_mean = 0.0;
  double rmse_std = 0.0;
  double mae_mean = 0.0;
  double mae_std = 0.0;
};

struct AblationTable {
  std::vector<AblationRun> runs;
  std::vector<AblationSummary> summary;
};

/// Trains every variant once per seed from init_params(config, seed) on the
/// same data and scores the held-out samples. Runs are ordered variant-major.
/// `threads` > 1 runs independent (variant, seed) jobs concurrently.
AblationTable run_ablation(const std::vector<AblationVariant>& variants,
                           const model::TrainConfig& train_cfg,
                           const std::vector<std::uint64_t>& seeds,
                           const std::vector<model::Sample>& train_set,
                           const std::vector<model::Sample>& test_set,
                           std::size_t threads = 1);

}  // namespace bts::eval
