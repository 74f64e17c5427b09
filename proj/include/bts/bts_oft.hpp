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

// Butterfly temporal shifting with orthogonal feature transfer.
//
// Each head slice x_{t,h} of width d is split into a transferable fold u
// (first C_s channels) and a retained part r. At a stage, frame t replaces
// its fold with the fold of its schedule partner, after removing the
// component along the target context c = P_h r_{t,h}:
//
//   OFT(a, b) = a - <a, b> / (|b|^2 + eps) * b
//
// All source folds are read from the stage input, so a stage is a
// simultaneous pairwise exchange.

#pragma once

#include <cstddef>

#include "bts/schedule.hpp"
#include "bts/tensor.hpp"

namespace bts::oft {

inline constexpr double kOftEps = 1e-6;

struct OftConfig {
  std::size_t heads = 4;
  std::size_t head_dim = 8;
  std::size_t fold_width = 2;
  double eps = kOftEps;

  /// C_s = round(ratio * d), for C_l channels split over `heads`.
  static OftConfig from_ratio(std::size_t channels, std::size_t heads,
                              double ratio);

  std::size_t channels() const { return heads * head_dim; }
  std::size_t retained_width() const { return head_dim - fold_width; }
  /// Projection tensor shape [H, C_s, d - C_s].
  ad::Shape projection_shape() const;

  /// Throws ValidationError unless 1 <= C_s < d and C_l == H * d.
  void validate(std::size_t channels) const;
};

/// u: [T, N, H, C_s], r: [T, N, H, d - C_s].
struct FoldView {
  ad::Tensor u;
  ad::Tensor r;
};

FoldView decompose(const ad::Tensor& tokens, const OftConfig& cfg);
/// Inverse of decompose: [T, N, H * d].
ad::Tensor reassemble(const FoldView& folds, const OftConfig& cfg);

/// Row-wise OFT over the last axis; a and b share a shape.
ad::Tensor oft(const ad::Tensor& a, const ad::Tensor& b, double eps = kOftEps);

/// Target contexts [T, N, H, C_s] from retained parts and projections.
ad::Tensor target_context(const ad::Tensor& retained, const ad::Tensor& projections);

/// One butterfly stage over tokens [T, N, C_l]; `projections` is [H, C_s, d - C_s].
ad::Tensor bts_apply(const ad::Tensor& tokens,
                     const sched::ButterflySchedule& schedule, std::size_t cycle,
                     std::size_t stage, const ad::Tensor& projections,
                     const OftConfig& cfg);

}  // namespace bts::oft
