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

// bts: synth | train | eval | gradcheck | analyze-schedule | ablate

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bts/app.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "run";
  std::optional<unsigned> precision;
  std::optional<std::size_t> threads;
  std::vector<std::string> sets;
  bool quiet = false;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "flat JSON config file");
  sub->add_option("--seed", f.seed, "overrides `seed`");
  sub->add_option("--out", f.out, "output directory")->capture_default_str();
  sub->add_option("--precision", f.precision, "floating-point width")
      ->check(CLI::IsMember({64u, 32u}));
  sub->add_option("--threads", f.threads, "worker threads (also BTS_THREADS)");
  sub->add_option("--set", f.sets, "key=value config override, repeatable");
  sub->add_flag("-q,--quiet", f.quiet, "suppress progress output");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Butterfly temporal-shift rPPG toolkit"};
  cli.require_subcommand(1);
  Flags flags;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"synth", "write a synthetic dataset manifest"},
      {"train", "train a model and write a checkpoint"},
      {"eval", "score a checkpoint on a split"},
      {"gradcheck", "compare analytic and numeric gradients"},
      {"analyze-schedule", "reachable-set growth of pairing schedules"},
      {"ablate", "schedule and fold-ratio ablations over seeds"},
  };
  for (const auto& [name, help] : commands) add_common(cli.add_subcommand(name, help), flags);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = cli.exit(e);
    return rc == 0 ? 0 : bts::app::kExitConfig;
  }
  const std::string command = cli.get_subcommands().front()->get_name();

  bts::app::Context ctx;
  try {
    ctx.config = flags.config.empty() ? bts::app::RunConfig()
                                      : bts::app::RunConfig::load(flags.config);
    if (const char* env = std::getenv("BTS_THREADS"); env && *env) {
      ctx.config.set(std::string("threads=") + env);
    }
    for (const auto& s : flags.sets) ctx.config.set(s);
    if (flags.seed) ctx.config.set("seed", *flags.seed);
    if (flags.threads) ctx.config.set("threads", *flags.threads);
    if (flags.precision) ctx.config.set("precision", *flags.precision);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return bts::app::exit_code(e);
  }
  ctx.out_dir = flags.out;
  ctx.log = flags.quiet ? nullptr : &std::cout;
  return bts::app::run_command(command, ctx, std::cerr);
}
