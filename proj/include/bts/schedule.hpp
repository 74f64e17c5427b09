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

// Temporal pairing schedules.
//
// At stage l of a cycle with rotation rho, frame t sits at position
// p = (t + rho) mod T and exchanges with the frame at position p XOR s_l.
// Rotation 1 moves the last frame to position 0. Every schedule is validated
// at construction so that no position pairs outside [0, T).

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bts/error.hpp"

namespace bts::sched {

enum class Variant { kButterfly, kReverseButterfly, kLinear, kLocalOnly };

std::string to_string(Variant variant);
/// Accepts "butterfly", "reverse-butterfly", "linear", "local-only".
Variant parse_variant(std::string_view name);

class OutOfRangePairing : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Offsets s_1..s_L for a variant.
std::vector<std::size_t> variant_offsets(Variant variant, std::size_t stages);

/// [0] when T is a power of two, otherwise [0, 1].
std::vector<std::size_t> default_cycles(std::size_t clip_length);

class ButterflySchedule {
 public:
  /// Throws ValidationError for L < 1 or T < 2 and OutOfRangePairing when any
  /// rotated position XOR an offset falls outside the clip.
  static ButterflySchedule build(Variant variant, std::size_t stages,
                                 std::size_t clip_length,
                                 std::vector<std::size_t> cycles);

  Variant variant() const { return variant_; }
  const std::vector<std::size_t>& offsets() const { return offsets_; }
  const std::vector<std::size_t>& cycles() const { return cycles_; }
  std::size_t stages() const { return offsets_.size(); }
  std::size_t num_cycles() const { return cycles_.size(); }
  std::size_t clip_length() const { return clip_length_; }

  /// Partner of frame t at 1-based `stage` of `cycle`.
  std::size_t partner(std::size_t cycle, std::size_t stage, std::size_t t) const;
  /// partner(cycle, stage, t) for every t.
  const std::vector<std::size_t>& partner_map(std::size_t cycle,
                                              std::size_t stage) const;

 private:
  ButterflySchedule() = default;

  Variant variant_ = Variant::kButterfly;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> cycles_;
  std::size_t clip_length_ = 0;
  // [cycle * stages + stage - 1][t]
  std::vector<std::vector<std::size_t>> maps_;
};

struct ReachabilityStep {
  std::size_t cycle = 0;
  std::size_t stage = 0;  // 1-based
  std::vector<std::size_t> set_sizes;  // per frame
  std::size_t min_size = 0;
  std::size_t max_size = 0;
  double mean_size = 0.0;
};

struct ReachabilityReport {
  std::size_t clip_length = 0;
  // One entry per executed stage, cycles in order.
  std::vector<ReachabilityStep> steps;
  // Every frame reaches every frame after the last stage.
  bool full_mixing = false;
  // First 1-based global stage at which some frame reaches all frames.
  std::optional<std::size_t> full_mixing_stage;
};

/// Reachable-set membership [frame][source] after the first `steps` stages
/// (counted across cycles), by propagation over the pairing graph.
std::vector<std::vector<bool>> reachable_sets(const ButterflySchedule& schedule,
                                              std::size_t steps);

ReachabilityReport reachability(const ButterflySchedule& schedule);

struct ScheduleSummary {
  std::string variant;
  std::vector<std::size_t> offsets;
  ReachabilityReport report;
};

/// All schedules must share T.
std::vector<ScheduleSummary> schedule_report(
    const std::vector<ButterflySchedule>& schedules);

}  // namespace bts::sched
