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
#include <string>
#include <vector>

#include "bts/preprocess.hpp"
#include "bts/train.hpp"

namespace bts::model {

/// How manifest rows turn into clips.
struct DataSpec {
  double amplitude = 0.02;
  double baseline = 0.5;
  // Frames generated per manifest row; 0 means one clip of the model length.
  std::size_t sequence_length = 0;
  std::size_t window_stride = 96;
};

/// Regenerates the rows of one split and cuts each sequence into windows of
/// the model clip length. Window ids are "<clip_id>@<start>".
std::vector<Sample> load_split(const std::vector<prep::ManifestRow>& rows,
                               const std::string& split, const DataSpec& data,
                               const ModelConfig& model);

/// Input standardization fitted on the (unflipped) samples.
prep::InputNorm fit_norm(const std::vector<Sample>& samples);

}  // namespace bts::model
