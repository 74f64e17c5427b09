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

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bts/model.hpp"
#include "bts/preprocess.hpp"

namespace bts::model {

struct Checkpoint {
  ModelState state;
  ParamMap adam_m;
  ParamMap adam_v;
  std::uint64_t step = 0;
  // Textual std::mt19937_64 state of the shuffling generator.
  std::string rng_state;
};

/// Binary container, see docs/formats.md. Values are written as raw IEEE-754
/// doubles so a round trip is bit-exact.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

struct Sample {
  std::string id;
  prep::VideoClip clip;
  prep::Waveform target;
};

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 2;
  double lr = 1e-3;
  double final_lr_ratio = 0.01;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  bool augment_flip = true;
  std::size_t threads = 1;
  std::uint64_t seed = 0;
};

struct LogRow {
  std::size_t epoch = 0;
  std::string split;
  double loss = 0.0;
  double lr = 0.0;
  double wallclock_s = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<LogRow> log;
};

/// Cosine decay from lr to lr * final_lr_ratio over total_steps.
double cosine_lr(const TrainConfig& cfg, std::uint64_t step, std::uint64_t total_steps);

/// Mean negative-Pearson loss over samples, no recording.
double evaluate_loss(const ModelState& state, const std::vector<Sample>& samples);

/// Per-sample loss and parameter gradients, each sample on its own tape.
/// Gradients are averaged in sample order regardless of thread count.
double batch_gradients(const ModelState& state, const std::vector<const Sample*>& batch,
                       std::size_t threads, std::vector<std::vector<double>>& grads);

/// Adam with coupled L2 weight decay over mini-batches of shuffled samples.
/// `init` supplies the starting state (parameters and input normalization);
/// `resume` continues optimizer moments, step counter and shuffling state.
/// Throws NumericalError on a non-finite loss.
TrainResult train(const ModelState& init, const TrainConfig& cfg,
                  const std::vector<Sample>& train_set,
                  const std::vector<Sample>& val_set,
                  const std::optional<Checkpoint>& resume = std::nullopt);

/// Columns: epoch,split,loss,lr,wallclock_s. wallclock_s is left empty unless
/// `with_wallclock`, keeping repeated runs byte-identical.
void write_train_log(const std::string& path, const std::vector<LogRow>& rows,
                     bool with_wallclock);

}  // namespace bts::model
