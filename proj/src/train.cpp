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

#include "bts/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "bts/error.hpp"
#include "bts/ops.hpp"

namespace bts::model {

double cosine_lr(const TrainConfig& cfg, std::uint64_t step, std::uint64_t total_steps) {
  const double lo = cfg.lr * cfg.final_lr_ratio;
  if (total_steps <= 1) return cfg.lr;
  const double progress =
      std::min(1.0, static_cast<double>(step) / static_cast<double>(total_steps - 1));
  return lo + 0.5 * (cfg.lr - lo) * (1.0 + std::cos(std::numbers::pi * progress));
}

double evaluate_loss(const ModelState& state, const std::vector<Sample>& samples) {
  if (samples.empty()) return 0.0;
  ad::NoGradScope no_grad;
  double total = 0.0;
  for (const Sample& s : samples) {
    ad::Tensor pred = model_forward(s.clip, state.params, state.config, state.norm);
    ad::Tensor target = ad::Tensor::from({s.target.samples.size()}, s.target.samples);
    total += pearson_loss(pred, target).item();
  }
  return total / static_cast<double>(samples.size());
}

double batch_gradients(const ModelState& state, const std::vector<const Sample*>& batch,
                       std::size_t threads, std::vector<std::vector<double>>& grads) {
  const std::size_t n = batch.size();
  std::vector<double> losses(n, 0.0);
  std::vector<std::vector<std::vector<double>>> per_sample(n);
  std::vector<std::exception_ptr> errors(n);

  auto run = [&](std::size_t i) {
    try {
      ParamMap leaves = bind_leaves(state.params);
      ad::Tape tape;
      ad::TapeScope scope(tape);
      const Sample& s = *batch[i];
      ad::Tensor pred = model_forward(s.clip, leaves, state.config, state.norm);
      ad::Tensor target = ad::Tensor::from({s.target.samples.size()}, s.target.samples);
      ad::Tensor loss = pearson_loss(pred, target);
      tape.backward(loss);
      losses[i] = loss.item();
      per_sample[i].reserve(leaves.size());
      for (const auto& [k, v] : leaves) per_sample[i].push_back(v.grad());
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < n; i += workers) run(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  // Index-ordered reduction keeps results independent of scheduling.
  grads.assign(state.params.size(), {});
  std::size_t q = 0;
  for (const auto& [k, v] : state.params) grads[q++].assign(v.numel(), 0.0);
  double loss_sum = 0.0;
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    loss_sum += losses[i];
    for (std::size_t p = 0; p < grads.size(); ++p) {
      for (std::size_t j = 0; j < grads[p].size(); ++j) {
        grads[p][j] += scale * per_sample[i][p][j];
      }
    }
  }
  return loss_sum * scale;
}

namespace {

// Tensors are shared handles; training updates in place, so callers'
// parameter maps are copied first.
ParamMap deep_copy(const ParamMap& params) {
  ParamMap out;
  for (const auto& [k, v] : params) out.emplace(k, v.detach());
  return out;
}

ParamMap zeros_like(const ParamMap& params) {
  ParamMap out;
  for (const auto& [k, v] : params) out.emplace(k, ad::Tensor::zeros(v.shape()));
  return out;
}

std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

}  // namespace

TrainResult train(const ModelState& init, const TrainConfig& cfg,
                  const std::vector<Sample>& train_set,
                  const std::vector<Sample>& val_set,
                  const std::optional<Checkpoint>& resume) {
  if (train_set.empty()) throw ValidationError("train: empty training set");
  if (cfg.batch_size == 0) throw ValidationError("train.batch_size must be >= 1");
  if (cfg.lr < 0.0) throw ValidationError("train.lr must be non-negative");

  TrainResult result;
  Checkpoint& ck = result.checkpoint;
  std::mt19937_64 rng(cfg.seed);
  if (resume) {
    ck = *resume;
    ck.state.params = deep_copy(resume->state.params);
    ck.adam_m = deep_copy(resume->adam_m);
    ck.adam_v = deep_copy(resume->adam_v);
    std::istringstream is(ck.rng_state);
    is >> rng;
    if (!is) throw ValidationError("checkpoint carries an unreadable RNG state");
  } else {
    ck.state = init;
    ck.state.params = deep_copy(init.params);
    ck.adam_m = zeros_like(init.params);
    ck.adam_v = zeros_like(init.params);
    ck.step = 0;
  }
  ck.state.config.validate();
  ModelState& state = ck.state;

  const std::size_t n = train_set.size();
  const std::uint64_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::uint64_t total_steps = steps_per_epoch * cfg.epochs;
  const std::size_t first_epoch = static_cast<std::size_t>(ck.step / steps_per_epoch) + 1;
  const auto t0 = std::chrono::steady_clock::now();
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  for (std::size_t epoch = first_epoch; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    double lr = cfg.lr;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      std::vector<Sample> flipped;
      flipped.reserve(stop - start);
      std::vector<const Sample*> batch;
      for (std::size_t i = start; i < stop; ++i) {
        const Sample& s = train_set[order[i]];
        if (cfg.augment_flip && coin(rng) < 0.5) {
          flipped.push_back({s.id, prep::flip_horizontal(s.clip), s.target});
          batch.push_back(&flipped.back());
        } else {
          batch.push_back(&s);
        }
      }
      std::vector<std::vector<double>> grads;
      const double loss = batch_gradients(state, batch, cfg.threads, grads);
      if (!std::isfinite(loss)) {
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch) +
                             ", step " + std::to_string(ck.step + 1));
      }
      epoch_loss += loss * static_cast<double>(stop - start);

      lr = cosine_lr(cfg, ck.step, total_steps);
      ++ck.step;
      const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(ck.step));
      const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(ck.step));
      std::size_t q = 0;
      for (auto& [key, value] : state.params) {
        auto theta = value.mutable_data();
        auto m = ck.adam_m.at(key).mutable_data();
        auto v = ck.adam_v.at(key).mutable_data();
        const auto& g = grads[q++];
        for (std::size_t j = 0; j < theta.size(); ++j) {
          const double gj = g[j] + cfg.weight_decay * theta[j];
          m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
          v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
          theta[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg.adam_eps);
        }
      }
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back({epoch, "train", epoch_loss / static_cast<double>(n), lr, wall});
    if (!val_set.empty()) {
      const double val = evaluate_loss(state, val_set);
      if (!std::isfinite(val)) {
        throw NumericalError("non-finite validation loss at epoch " + std::to_string(epoch));
      }
      result.log.push_back({epoch, "val", val, lr, wall});
    }
  }
  ck.rng_state = rng_to_string(rng);
  return result;
}

void write_train_log(const std::string& path, const std::vector<LogRow>& rows,
                     bool with_wallclock) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write training log " + path);
  os << "epoch,split,loss,lr,wallclock_s\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%zu,%s,%.17g,%.17g,", r.epoch, r.split.c_str(),
                  r.loss, r.lr);
    os << buf;
    if (with_wallclock) {
      std::snprintf(buf, sizeof(buf), "%.3f", r.wallclock_s);
      os << buf;
    }
    os << '\n';
  }
}

}  // namespace bts::model
