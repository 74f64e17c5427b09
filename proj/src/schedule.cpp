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

#include "bts/schedule.hpp"

#include <algorithm>
#include <bit>

namespace bts::sched {

namespace {

using ReachSets = std::vector<std::vector<bool>>;

ReachSets identity_sets(std::size_t T) {
  ReachSets sets(T, std::vector<bool>(T, false));
  for (std::size_t t = 0; t < T; ++t) sets[t][t] = true;
  return sets;
}

// Frame t absorbs everything its partner had reached before this stage.
void propagate(ReachSets& sets, const std::vector<std::size_t>& map) {
  ReachSets next = sets;
  for (std::size_t t = 0; t < sets.size(); ++t) {
    const auto& other = sets[map[t]];
    for (std::size_t j = 0; j < other.size(); ++j) {
      if (other[j]) next[t][j] = true;
    }
  }
  sets = std::move(next);
}

}  // namespace

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::kButterfly: return "butterfly";
    case Variant::kReverseButterfly: return "reverse-butterfly";
    case Variant::kLinear: return "linear";
    case Variant::kLocalOnly: return "local-only";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  if (name == "butterfly") return Variant::kButterfly;
  if (name == "reverse-butterfly") return Variant::kReverseButterfly;
  if (name == "linear") return Variant::kLinear;
  if (name == "local-only") return Variant::kLocalOnly;
  throw ConfigError("unknown schedule variant '" + std::string(name) + "'");
}

std::vector<std::size_t> variant_offsets(Variant variant, std::size_t stages) {
  std::vector<std::size_t> offsets(stages);
  for (std::size_t l = 1; l <= stages; ++l) {
    switch (variant) {
      case Variant::kButterfly: offsets[l - 1] = std::size_t{1} << (l - 1); break;
      case Variant::kReverseButterfly: offsets[l - 1] = std::size_t{1} << (stages - l); break;
      case Variant::kLinear: offsets[l - 1] = l; break;
      case Variant::kLocalOnly: offsets[l - 1] = 1; break;
    }
  }
  return offsets;
}

std::vector<std::size_t> default_cycles(std::size_t clip_length) {
  if (std::has_single_bit(clip_length)) return {0};
  return {0, 1};
}

ButterflySchedule ButterflySchedule::build(Variant variant, std::size_t stages,
                                           std::size_t clip_length,
                                           std::vector<std::size_t> cycles) {
  if (stages < 1) throw ValidationError("schedule needs at least one stage");
  if (clip_length < 2) throw ValidationError("schedule needs clip length >= 2");
  if (stages >= 8 * sizeof(std::size_t) - 1) {
    throw ValidationError("too many schedule stages");
  }
  if (cycles.empty()) throw ValidationError("schedule needs at least one cycle");
  ButterflySchedule s;
  s.variant_ = variant;
  s.offsets_ = variant_offsets(variant, stages);
  s.cycles_ = std::move(cycles);
  s.clip_length_ = clip_length;
  const std::size_t T = clip_length;
  for (std::size_t c = 0; c < s.cycles_.size(); ++c) {
    const std::size_t rot = s.cycles_[c];
    if (rot >= T) {
      throw ValidationError("cycle rotation " + std::to_string(rot) +
                            " must be below clip length " + std::to_string(T));
    }
    for (std::size_t l = 0; l < stages; ++l) {
      const std::size_t offset = s.offsets_[l];
      std::vector<std::size_t> map(T);
      for (std::size_t t = 0; t < T; ++t) {
        const std::size_t pos = (t + rot) % T;
        const std::size_t paired = pos ^ offset;
        if (paired >= T) {
          throw OutOfRangePairing(
              to_string(variant) + " stage " + std::to_string(l + 1) +
              " (offset " + std::to_string(offset) + ", rotation " +
              std::to_string(rot) + "): position " + std::to_string(pos) +
              " pairs with " + std::to_string(paired) + " >= T=" + std::to_string(T));
        }
        map[t] = (paired + T - rot) % T;
      }
      s.maps_.push_back(std::move(map));
    }
  }
  return s;
}

std::size_t ButterflySchedule::partner(std::size_t cycle, std::size_t stage,
                                       std::size_t t) const {
  return partner_map(cycle, stage).at(t);
}

const std::vector<std::size_t>& ButterflySchedule::partner_map(
    std::size_t cycle, std::size_t stage) const {
  if (cycle >= cycles_.size() || stage < 1 || stage > offsets_.size()) {
    throw ValidationError("partner: cycle/stage out of range");
  }
  return maps_[cycle * offsets_.size() + stage - 1];
}

std::vector<std::vector<bool>> reachable_sets(const ButterflySchedule& schedule,
                                              std::size_t steps) {
  ReachSets sets = identity_sets(schedule.clip_length());
  std::size_t done = 0;
  for (std::size_t c = 0; c < schedule.num_cycles() && done < steps; ++c) {
    for (std::size_t l = 1; l <= schedule.stages() && done < steps; ++l, ++done) {
      propagate(sets, schedule.partner_map(c, l));
    }
  }
  return sets;
}

ReachabilityReport reachability(const ButterflySchedule& schedule) {
  const std::size_t T = schedule.clip_length();
  ReachabilityReport report;
  report.clip_length = T;
  ReachSets sets = identity_sets(T);
  std::size_t global = 0;
  for (std::size_t c = 0; c < schedule.num_cycles(); ++c) {
    for (std::size_t l = 1; l <= schedule.stages(); ++l) {
      ++global;
      propagate(sets, schedule.partner_map(c, l));

      ReachabilityStep step;
      step.cycle = c;
      step.stage = l;
      step.set_sizes.resize(T);
      double total = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        step.set_sizes[t] = static_cast<std::size_t>(
            std::count(sets[t].begin(), sets[t].end(), true));
        total += static_cast<double>(step.set_sizes[t]);
      }
      step.min_size = *std::min_element(step.set_sizes.begin(), step.set_sizes.end());
      step.max_size = *std::max_element(step.set_sizes.begin(), step.set_sizes.end());
      step.mean_size = total / static_cast<double>(T);
      if (!report.full_mixing_stage && step.max_size == T) {
        report.full_mixing_stage = global;
      }
      report.steps.push_back(std::move(step));
    }
  }
  report.full_mixing = !report.steps.empty() && report.steps.back().min_size == T;
  return report;
}

std::vector<ScheduleSummary> schedule_report(
    const std::vector<ButterflySchedule>& schedules) {
  std::vector<ScheduleSummary> rows;
  for (const auto& s : schedules) {
    if (s.clip_length() != schedules.front().clip_length()) {
      throw ValidationError("schedule_report: schedules must share clip length");
    }
    rows.push_back({to_string(s.variant()), s.offsets(), reachability(s)});
  }
  return rows;
}

}  // namespace bts::sched
