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

// Command implementations behind the `bts` executable. Each command reads a
// RunConfig, writes its outputs plus `<command>.resolved.json` into the
// output directory and throws bts::Error on failure.

#pragma once

#include <exception>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "bts/config.hpp"
#include "bts/grad_check.hpp"
#include "bts/preprocess.hpp"

namespace bts::app {

inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitValidation = 3;
inline constexpr int kExitNumerical = 4;

/// Maps an exception to the process exit status.
int exit_code(const std::exception& e);

struct Context {
  RunConfig config;
  std::filesystem::path out_dir = "run";
  std::ostream* log = nullptr;  // progress and summaries; null silences
};

/// Manifest rows for the configured split sizes, deterministic in `seed`.
std::vector<prep::ManifestRow> synth_rows(const RunConfig& config);

/// Writes manifest.csv.
void cmd_synth(const Context& ctx);
/// Writes checkpoint.bin and train_log.csv.
void cmd_train(const Context& ctx);
/// Writes metrics.csv, eval_clips.csv, waveforms.csv and waveforms.svg.
void cmd_eval(const Context& ctx);

struct GradTarget {
  std::string name;
  ad::GradCheckReport report;
};

/// Target names in report order.
const std::vector<std::string>& gradcheck_target_names();

/// Runs every target for `draws` seeded draws and keeps the worst report per
/// target. `inject_fault` names a target whose output is routed through an
/// op with a deliberately wrong backward (harness self-test).
std::vector<GradTarget> run_gradcheck(std::uint64_t seed, std::size_t draws,
                                      const ad::GradCheckOptions& options,
                                      const std::string& inject_fault = "");

/// Writes gradcheck.csv; returns false when any target fails.
bool cmd_gradcheck(const Context& ctx);
/// Writes schedule.csv and schedule.svg.
void cmd_analyze_schedule(const Context& ctx);
/// Writes ablation_runs.csv, ablation_summary.csv and ablation.svg.
void cmd_ablate(const Context& ctx);

/// Dispatches by subcommand name and converts errors to exit codes, printing
/// the message to `err`.
int run_command(const std::string& command, const Context& ctx, std::ostream& err);

}  // namespace bts::app
