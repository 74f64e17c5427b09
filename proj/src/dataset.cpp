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

#include "bts/dataset.hpp"

namespace bts::model {

std::vector<Sample> load_split(const std::vector<prep::ManifestRow>& rows,
                               const std::string& split, const DataSpec& data,
                               const ModelConfig& model) {
  const std::size_t T = model.clip_length;
  const std::size_t M = data.sequence_length == 0 ? T : data.sequence_length;
  std::vector<Sample> out;
  for (const auto& row : rows) {
    if (row.split != split) continue;
    prep::SynthParams params;
    params.pulse_frequency = row.pulse_frequency_hz;
    params.amplitude = data.amplitude;
    params.noise_std = row.noise_std;
    params.motion_amplitude = row.motion_amplitude;
    params.baseline = data.baseline;
    params.seed = row.seed;
    auto [clip, wave] =
        prep::synth_clip(params, {M, model.height, model.width, model.frame_rate});
    for (const auto& [begin, end] : prep::sliding_windows(M, T, data.window_stride)) {
      Sample s;
      s.id = row.clip_id + "@" + std::to_string(begin);
      s.clip = prep::slice_clip(clip, begin, end);
      s.target = prep::slice_waveform(wave, begin, end);
      out.push_back(std::move(s));
    }
  }
  return out;
}

prep::InputNorm fit_norm(const std::vector<Sample>& samples) {
  std::vector<ad::Tensor> fused;
  fused.reserve(samples.size());
  for (const auto& s : samples) {
    fused.push_back(prep::fuse_channels(s.clip, prep::compute_ndf(s.clip)));
  }
  return prep::fit_input_norm(fused);
}

}  // namespace bts::model
