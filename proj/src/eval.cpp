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

#include "bts/eval.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <exception>
#include <numbers>
#include <thread>

#include "bts/dataset.hpp"
#include "bts/ops.hpp"

namespace bts::eval {

namespace {

std::size_t fft_size(std::size_t length) {
  return std::max(kMinFftSize, std::bit_ceil(length));
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_of(std::span<const double> v, double mu) {
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

double hr_bin_width(std::size_t length, double frame_rate) {
  return frame_rate / static_cast<double>(fft_size(length));
}

HrEstimate estimate_hr(const prep::Waveform& wave, double band_lo, double band_hi) {
  const std::size_t n = wave.samples.size();
  const double fs = wave.frame_rate;
  if (!(fs > 0.0)) throw ValidationError("estimate_hr: frame rate must be positive");
  if (static_cast<double>(n) < 2.0 * fs) {
    throw ValidationError("estimate_hr: need at least two seconds of signal");
  }
  const std::size_t nfft = fft_size(n);
  const double df = fs / static_cast<double>(nfft);
  const auto k_lo = static_cast<std::size_t>(std::ceil(band_lo / df));
  const auto k_hi = static_cast<std::size_t>(std::floor(band_hi / df));
  if (k_hi >= nfft / 2) {
    throw ValidationError("estimate_hr: band reaches the Nyquist frequency " +
                          std::to_string(fs / 2.0) + " Hz");
  }
  if (k_lo > k_hi) throw ValidationError("estimate_hr: analysis band is empty at this resolution");

  const double mu = mean_of(wave.samples);
  std::vector<double> x(n);
  double peak_abs = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double hann =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                             static_cast<double>(n - 1));
    x[i] = (wave.samples[i] - mu) * hann;
    peak_abs = std::max(peak_abs, std::abs(wave.samples[i] - mu));
  }
  if (peak_abs <= 1e-12 * std::max(1.0, std::abs(mu))) {
    throw NoPeakError("estimate_hr: signal has no in-band power");
  }

  // Only the in-band bins of the zero-padded DFT are needed.
  HrEstimate est;
  double best = -1.0;
  for (std::size_t k = k_lo; k <= k_hi; ++k) {
    const double w = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(nfft);
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double ph = w * static_cast<double>(i);
      re += x[i] * std::cos(ph);
      im -= x[i] * std::sin(ph);
    }
    const double power = re * re + im * im;
    const double f = static_cast<double>(k) * df;
    est.spectrum.emplace_back(f, power);
    if (power > best) {
      best = power;
      est.peak_frequency = f;
    }
  }
  est.bpm = 60.0 * est.peak_frequency;
  return est;
}

MetricsReport compute_metrics(std::span<const double> pred_bpm,
                              std::span<const double> gt_bpm) {
  if (pred_bpm.size() != gt_bpm.size() || pred_bpm.empty()) {
    throw ValidationError("compute_metrics: lists must have equal, nonzero length");
  }
  const std::size_t n = pred_bpm.size();
  MetricsReport m;
  double se = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(gt_bpm[i] > 0.0)) throw ValidationError("compute_metrics: ground truth must be > 0");
    const double d = pred_bpm[i] - gt_bpm[i];
    m.mae += std::abs(d);
    m.mape += std::abs(d) / gt_bpm[i];
    se += d * d;
  }
  m.mae /= static_cast<double>(n);
  m.mape = 100.0 * m.mape / static_cast<double>(n);
  m.rmse = std::sqrt(se / static_cast<double>(n));
  if (n >= 2) {
    const double mp = mean_of(pred_bpm), mg = mean_of(gt_bpm);
    double cov = 0.0, vp = 0.0, vg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      cov += (pred_bpm[i] - mp) * (gt_bpm[i] - mg);
      vp += (pred_bpm[i] - mp) * (pred_bpm[i] - mp);
      vg += (gt_bpm[i] - mg) * (gt_bpm[i] - mg);
    }
    if (vp > 0.0 && vg > 0.0) {
      m.pearson = std::clamp(cov / std::sqrt(vp * vg), -1.0, 1.0);
    }
  }
  return m;
}

std::vector<std::array<double, 3>> spatial_mean_trace(const prep::VideoClip& clip) {
  const std::size_t T = clip.length();
  const std::size_t pixels = clip.height() * clip.width();
  const auto x = clip.frames.data();
  std::vector<std::array<double, 3>> out(T, {0.0, 0.0, 0.0});
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t p = 0; p < pixels; ++p) {
      for (std::size_t c = 0; c < 3; ++c) out[t][c] += x[(t * pixels + p) * 3 + c];
    }
    for (double& v : out[t]) v /= static_cast<double>(pixels);
  }
  return out;
}

prep::Waveform pos_baseline(const std::vector<std::array<double, 3>>& rgb,
                            double frame_rate) {
  const std::size_t n = rgb.size();
  const auto l = static_cast<std::size_t>(std::ceil(1.6 * frame_rate));
  if (l < 2 || n < l) {
    throw ValidationError("pos_baseline: trace shorter than the 1.6 s window");
  }
  std::vector<double> h(n, 0.0);
  std::vector<double> s0(l), s1(l), win(l);
  for (std::size_t start = 0; start + l <= n; ++start) {
    std::array<double, 3> mu{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < l; ++i) {
      for (std::size_t c = 0; c < 3; ++c) mu[c] += rgb[start + i][c];
    }
    bool degenerate = false;
    for (double& m : mu) {
      m /= static_cast<double>(l);
      if (m <= 0.0) degenerate = true;
    }
    if (degenerate) continue;
    for (std::size_t i = 0; i < l; ++i) {
      const double r = rgb[start + i][0] / mu[0];
      const double g = rgb[start + i][1] / mu[1];
      const double b = rgb[start + i][2] / mu[2];
      s0[i] = g - b;
      s1[i] = -2.0 * r + g + b;
    }
    const double sd0 = std_of(s0, mean_of(s0));
    const double sd1 = std_of(s1, mean_of(s1));
    const double alpha = sd1 > 1e-12 ? sd0 / sd1 : 0.0;
    for (std::size_t i = 0; i < l; ++i) win[i] = s0[i] + alpha * s1[i];
    const double wm = mean_of(win);
    for (std::size_t i = 0; i < l; ++i) h[start + i] += win[i] - wm;
  }
  const double hm = mean_of(h);
  for (double& v : h) v -= hm;
  return {std::move(h), frame_rate};
}

EvalResult evaluate(const model::ModelState& state,
                    const std::vector<model::Sample>& samples) {
  EvalResult res;
  std::vector<double> pred, gt;
  for (const auto& s : samples) {
    ClipResult c;
    c.id = s.id;
    c.prediction = model::predict(s.clip, state);
    c.target = s.target;
    {
      ad::NoGradScope no_grad;
      c.loss = model::pearson_loss(
                   ad::Tensor::from({c.prediction.samples.size()}, c.prediction.samples),
                   ad::Tensor::from({c.target.samples.size()}, c.target.samples))
                   .item();
    }
    c.gt_bpm = estimate_hr(c.target).bpm;
    try {
      c.pred_bpm = estimate_hr(c.prediction).bpm;
    } catch (const NoPeakError&) {
      // A flat prediction gets the band's lower edge.
      c.pred_bpm = 60.0 * prep::kMinPulseHz;
    }
    pred.push_back(c.pred_bpm);
    gt.push_back(c.gt_bpm);
    res.mean_loss += c.loss;
    res.clips.push_back(std::move(c));
  }
  if (!samples.empty()) {
    res.mean_loss /= static_cast<double>(samples.size());
    res.metrics = compute_metrics(pred, gt);
  }
  return res;
}

std::vector<AblationVariant> schedule_variants(const model::ModelConfig& base) {
  std::vector<AblationVariant> out;
  for (auto v : {sched::Variant::kLocalOnly, sched::Variant::kLinear,
                 sched::Variant::kReverseButterfly, sched::Variant::kButterfly}) {
    model::ModelConfig cfg = base;
    cfg.variant = v;
    out.push_back({sched::to_string(v), cfg});
  }
  return out;
}

std::vector<AblationVariant> fold_ratio_variants(const model::ModelConfig& base) {
  std::vector<AblationVariant> out;
  const std::pair<const char*, double> ratios[] = {
      {"rho=1/8", 0.125}, {"rho=1/4", 0.25}, {"rho=3/8", 0.375}, {"rho=1/2", 0.5}};
  for (const auto& [name, rho] : ratios) {
    model::ModelConfig cfg = base;
    cfg.fold_ratio = rho;
    out.push_back({name, cfg});
  }
  return out;
}

AblationTable run_ablation(const std::vector<AblationVariant>& variants,
                           const model::TrainConfig& train_cfg,
                           const std::vector<std::uint64_t>& seeds,
                           const std::vector<model::Sample>& train_set,
                           const std::vector<model::Sample>& test_set,
                           std::size_t threads) {
  if (variants.empty() || seeds.empty()) {
    throw ValidationError("run_ablation: need at least one variant and one seed");
  }
  for (const auto& v : variants) v.config.validate();
  const prep::InputNorm norm = model::fit_norm(train_set);

  AblationTable table;
  table.runs.resize(variants.size() * seeds.size());
  std::vector<std::exception_ptr> errors(table.runs.size());
  auto job = [&](std::size_t j) {
    try {
      const AblationVariant& v = variants[j / seeds.size()];
      const std::uint64_t seed = seeds[j % seeds.size()];
      model::ModelState init{v.config, norm, model::init_params(v.config, seed)};
      model::TrainConfig tc = train_cfg;
      tc.seed = seed;
      tc.threads = 1;
      AblationRun run;
      run.variant = v.name;
      run.seed = seed;
      run.init_hash = model::hash_params(init.params);
      model::TrainResult tr = model::train(init, tc, train_set, {});
      run.final_train_loss = tr.log.empty() ? 0.0 : tr.log.back().loss;
      EvalResult er = evaluate(tr.checkpoint.state, test_set);
      run.metrics = er.metrics;
      run.test_loss = er.mean_loss;
      table.runs[j] = std::move(run);
    } catch (...) {
      errors[j] = std::current_exception();
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, table.runs.size()));
  if (workers == 1) {
    for (std::size_t j = 0; j < table.runs.size(); ++j) job(j);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t j = next++; j < table.runs.size(); j = next++) job(j);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (std::size_t vi = 0; vi < variants.size(); ++vi) {
    AblationSummary s;
    s.variant = variants[vi].name;
    s.runs = seeds.size();
    std::vector<double> rmse, mae;
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      rmse.push_back(table.runs[vi * seeds.size() + si].metrics.rmse);
      mae.push_back(table.runs[vi * seeds.size() + si].metrics.mae);
    }
    auto sample_std = [](const std::vector<double>& v, double mu) {
      if (v.size() < 2) return 0.0;
      double acc = 0.0;
      for (double x : v) acc += (x - mu) * (x - mu);
      return std::sqrt(acc / static_cast<double>(v.size() - 1));
    };
    s.rmse_mean = mean_of(rmse);
    s.mae_mean = mean_of(mae);
    s.rmse_std = sample_std(rmse, s.rmse_mean);
    s.mae_std = sample_std(mae, s.mae_mean);
    table.summary.push_back(s);
  }
  return table;
}

}  // namespace bts::eval
