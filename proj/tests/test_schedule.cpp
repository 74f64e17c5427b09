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

#include <gtest/gtest.h>

#include <algorithm>
#include <optional>
#include <set>

#include "bts/schedule.hpp"

namespace bts::sched {
namespace {

using Sets = std::vector<std::set<std::size_t>>;

// Subset-XOR enumeration of the first `stages` offsets, applied around the
// rotation: frame t reaches rot^-1(rot(t) ^ x) for every x in the span.
Sets xor_span_oracle(const std::vector<std::size_t>& offsets, std::size_t stages,
                     std::size_t T, std::size_t rotation) {
  std::set<std::size_t> span;
  for (std::size_t mask = 0; mask < (std::size_t{1} << stages); ++mask) {
    std::size_t x = 0;
    for (std::size_t l = 0; l < stages; ++l) {
      if (mask >> l & 1) x ^= offsets[l];
    }
    span.insert(x);
  }
  Sets out(T);
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t p = (t + rotation) % T;
    for (std::size_t x : span) out[t].insert(((p ^ x) + T - rotation) % T);
  }
  return out;
}

// Independent propagation over explicitly computed partners.
Sets propagate_oracle(const std::vector<std::size_t>& offsets,
                      const std::vector<std::size_t>& rotations, std::size_t T) {
  Sets sets(T);
  for (std::size_t t = 0; t < T; ++t) sets[t] = {t};
  for (std::size_t rot : rotations) {
    for (std::size_t s : offsets) {
      Sets next = sets;
      for (std::size_t t = 0; t < T; ++t) {
        const std::size_t partner = ((((t + rot) % T) ^ s) + T - rot) % T;
        next[t].insert(sets[partner].begin(), sets[partner].end());
      }
      sets = std::move(next);
    }
  }
  return sets;
}

Sets to_sets(const std::vector<std::vector<bool>>& m) {
  Sets out(m.size());
  for (std::size_t t = 0; t < m.size(); ++t) {
    for (std::size_t j = 0; j < m[t].size(); ++j) {
      if (m[t][j]) out[t].insert(j);
    }
  }
  return out;
}

TEST(Schedule, VariantOffsets) {
  EXPECT_EQ(variant_offsets(Variant::kButterfly, 6), (std::vector<std::size_t>{1, 2, 4, 8, 16, 32}));
  EXPECT_EQ(variant_offsets(Variant::kReverseButterfly, 6),
            (std::vector<std::size_t>{32, 16, 8, 4, 2, 1}));
  EXPECT_EQ(variant_offsets(Variant::kLinear, 6), (std::vector<std::size_t>{1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(variant_offsets(Variant::kLocalOnly, 6), (std::vector<std::size_t>(6, 1)));
}

TEST(Schedule, ParseVariantNames) {
  for (auto v : {Variant::kButterfly, Variant::kReverseButterfly, Variant::kLinear, Variant::kLocalOnly}) {
    EXPECT_EQ(parse_variant(to_string(v)), v);
  }
  EXPECT_THROW(parse_variant("zigzag"), ConfigError);
}

TEST(Schedule, Build192TwoCycles) {
  const auto s = ButterflySchedule::build(Variant::kButterfly, 6, 192, {0, 1});
  EXPECT_EQ(s.offsets(), (std::vector<std::size_t>{1, 2, 4, 8, 16, 32}));
  EXPECT_EQ(s.cycles(), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(s.num_cycles(), 2u);
}

TEST(Schedule, LocalOnly64) {
  const auto s = ButterflySchedule::build(Variant::kLocalOnly, 6, 64, {0});
  EXPECT_EQ(s.offsets(), (std::vector<std::size_t>(6, 1)));
}

TEST(Schedule, OutOfRangeAt100) {
  EXPECT_THROW(ButterflySchedule::build(Variant::kButterfly, 6, 100, {0}), OutOfRangePairing);
  // The exhaustive check agrees: some t has t ^ 32 >= 100.
  bool any = false;
  for (std::size_t t = 0; t < 100; ++t) any = any || (t ^ 32) >= 100;
  EXPECT_TRUE(any);
}

TEST(Schedule, RejectsDegenerateArguments) {
  EXPECT_THROW(ButterflySchedule::build(Variant::kButterfly, 0, 64, {0}), ValidationError);
  EXPECT_THROW(ButterflySchedule::build(Variant::kButterfly, 1, 1, {0}), ValidationError);
  EXPECT_THROW(ButterflySchedule::build(Variant::kButterfly, 1, 8, {}), ValidationError);
  EXPECT_THROW(ButterflySchedule::build(Variant::kButterfly, 1, 8, {8}), ValidationError);
}

TEST(Schedule, DefaultCycles) {
  EXPECT_EQ(default_cycles(64), std::vector<std::size_t>{0});
  EXPECT_EQ(default_cycles(192), (std::vector<std::size_t>{0, 1}));
}

TEST(Schedule, PartnerExamples) {
  const auto s = ButterflySchedule::build(Variant::kButterfly, 6, 64, {0});
  EXPECT_EQ(s.partner(0, 1, 5), 4u);
  EXPECT_EQ(s.partner(0, 3, 0), 4u);
  EXPECT_EQ(s.partner(0, 6, 10), 42u);
}

TEST(Schedule, RotationMovesLastFrameFirst) {
  const auto s = ButterflySchedule::build(Variant::kButterfly, 1, 8, {1});
  // Frame 7 sits at position 0 and pairs with the frame at position 1 (frame 0).
  EXPECT_EQ(s.partner(0, 1, 7), 0u);
  EXPECT_EQ(s.partner(0, 1, 1), 2u);
}

TEST(Schedule, InvolutionAndBijection) {
  for (auto v : {Variant::kButterfly, Variant::kReverseButterfly, Variant::kLinear, Variant::kLocalOnly}) {
    const auto s = ButterflySchedule::build(v, 6, 192, {0, 1});
    for (std::size_t c = 0; c < s.num_cycles(); ++c) {
      for (std::size_t l = 1; l <= s.stages(); ++l) {
        std::vector<bool> hit(192, false);
        for (std::size_t t = 0; t < 192; ++t) {
          const std::size_t p = s.partner(c, l, t);
          ASSERT_LT(p, 192u);
          EXPECT_EQ(s.partner(c, l, p), t);
          hit[p] = true;
        }
        for (bool h : hit) EXPECT_TRUE(h);
      }
    }
  }
}

TEST(Reachability, Examples64) {
  auto last_sizes = [](Variant v) {
    const auto rep = reachability(ButterflySchedule::build(v, 6, 64, {0}));
    return std::make_pair(rep.steps.back().min_size, rep.steps.back().max_size);
  };
  EXPECT_EQ(last_sizes(Variant::kButterfly), (std::pair<std::size_t, std::size_t>(64, 64)));
  EXPECT_EQ(last_sizes(Variant::kLocalOnly), (std::pair<std::size_t, std::size_t>(2, 2)));
  EXPECT_EQ(last_sizes(Variant::kLinear), (std::pair<std::size_t, std::size_t>(8, 8)));
}

TEST(Reachability, SetsContainSelfAndGrow) {
  const auto s = ButterflySchedule::build(Variant::kLinear, 6, 192, {0, 1});
  const auto rep = reachability(s);
  ASSERT_EQ(rep.steps.size(), 12u);
  for (std::size_t t = 0; t < 192; ++t) {
    std::size_t prev = 1;
    for (const auto& st : rep.steps) {
      EXPECT_GE(st.set_sizes[t], prev);
      prev = st.set_sizes[t];
    }
  }
  for (std::size_t k = 0; k <= 12; ++k) {
    const auto sets = reachable_sets(s, k);
    for (std::size_t t = 0; t < 192; ++t) EXPECT_TRUE(sets[t][t]);
  }
}

TEST(Reachability, MatchesXorSpanOracleUpTo256) {
  for (std::size_t T = 2; T <= 256; ++T) {
    for (auto v : {Variant::kButterfly, Variant::kReverseButterfly, Variant::kLinear, Variant::kLocalOnly}) {
      for (std::size_t L = 1; L <= 8; ++L) {
        for (std::size_t rot : {std::size_t{0}, std::size_t{1}}) {
          if (rot >= T) continue;
          std::optional<ButterflySchedule> s;
          try {
            s = ButterflySchedule::build(v, L, T, {rot});
          } catch (const OutOfRangePairing&) {
            continue;
          }
          // Every prefix for short clips, the full schedule otherwise.
          for (std::size_t k = T <= 64 ? 1 : L; k <= L; ++k) {
            ASSERT_EQ(to_sets(reachable_sets(*s, k)), xor_span_oracle(s->offsets(), k, T, rot))
                << to_string(v) << " T=" << T << " L=" << L << " rot=" << rot << " k=" << k;
          }
        }
      }
    }
  }
}

TEST(Reachability, TwoCyclesAt192) {
  const std::vector<std::size_t> offsets = {1, 2, 4, 8, 16, 32};
  const auto one = ButterflySchedule::build(Variant::kButterfly, 6, 192, {0});
  const auto two = ButterflySchedule::build(Variant::kButterfly, 6, 192, {0, 1});
  const Sets a = to_sets(reachable_sets(one, 6));
  const Sets b = to_sets(reachable_sets(two, 12));
  EXPECT_EQ(a, propagate_oracle(offsets, {0}, 192));
  EXPECT_EQ(b, propagate_oracle(offsets, {0, 1}, 192));
  for (std::size_t t = 0; t < 192; ++t) {
    for (std::size_t j : a[t]) EXPECT_EQ(j / 64, t / 64);
    EXPECT_EQ(a[t].size(), 64u);
    EXPECT_GT(b[t].size(), a[t].size());
    EXPECT_TRUE(std::includes(b[t].begin(), b[t].end(), a[t].begin(), a[t].end()));
  }
}

TEST(ScheduleReport, FullMixingStage) {
  const auto report = schedule_report({ButterflySchedule::build(Variant::kButterfly, 6, 64, {0}),
                                       ButterflySchedule::build(Variant::kReverseButterfly, 6, 64, {0}),
                                       ButterflySchedule::build(Variant::kLocalOnly, 6, 64, {0})});
  ASSERT_EQ(report.size(), 3u);
  EXPECT_EQ(report[0].report.full_mixing_stage, std::optional<std::size_t>(6));
  EXPECT_EQ(report[1].report.full_mixing_stage, std::optional<std::size_t>(6));
  EXPECT_FALSE(report[2].report.full_mixing_stage.has_value());
  EXPECT_TRUE(report[0].report.full_mixing);
  EXPECT_FALSE(report[2].report.full_mixing);
}

TEST(ScheduleReport, RejectsMixedLengths) {
  EXPECT_THROW(schedule_report({ButterflySchedule::build(Variant::kButterfly, 3, 8, {0}),
                                ButterflySchedule::build(Variant::kButterfly, 3, 16, {0})}),
               ValidationError);
}

}  // namespace
}  // namespace bts::sched
