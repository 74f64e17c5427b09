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

#include "bts/app.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <random>

#include "bts/dataset.hpp"
#include "bts/error.hpp"
#include "bts/eval.hpp"
#include "bts/svg.hpp"
#include "bts/train.hpp"

namespace bts::app {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, v);
  return buf;
}

class CsvFile {
 public:
  CsvFile(const fs::path& path, const std::string& header) : path_(path), os_(path) {
    if (!os_) throw IoError("cannot write " + path.string());
    os_ << header << '\n';
  }
  ~CsvFile() = default;

  template <typename... Cells>
  void row(const Cells&... cells) {
    bool first = true;
    ((os_ << (first ? "" : ",") << cells, first = false), ...);
    os_ << '\n';
  }

  void close() {
    os_.close();
    if (!os_) throw IoError("write failed: " + path_.string());
  }

 private:
  fs::path path_;
  std::ofstream os_;
};

void say(const Context& ctx, const std::string& line) {
  if (ctx.log) *ctx.log << line << '\n';
}

fs::path manifest_path(const Context& ctx) {
  const std::string m = ctx.config.get_string("data.manifest");
  return m.empty() ? ctx.out_dir / "manifest.csv" : fs::path(m);
}

std::vector<prep::ManifestRow> read_rows(const Context& ctx) {
  const fs::path path = manifest_path(ctx);
  if (!fs::exists(path)) {
    throw IoError("manifest " + path.string() + " not found (run `bts synth` first)");
  }
  return prep::read_manifest(path.string());
}

std::vector<model::Sample> split_samples(const std::vector<prep::ManifestRow>& rows,
                                         const std::string& split, const Context& ctx,
                                         const model::ModelConfig& mc) {
  auto samples = model::load_split(rows, split, ctx.config.data_spec(), mc);
  if (samples.empty()) throw ValidationError("manifest has no '" + split + "' clips");
  return samples;
}

// Unit-variance copy for plotting overlays.
std::vector<double> standardized(const std::vector<double>& v) {
  double mu = 0.0, ss = 0.0;
  for (double x : v) mu += x;
  mu /= static_cast<double>(v.size());
  for (double x : v) ss += (x - mu) * (x - mu);
  const double sd = std::sqrt(ss / static_cast<double>(v.size()));
  std::vector<double> out;
  for (double x : v) out.push_back(sd > 0.0 ? (x - mu) / sd : 0.0);
  return out;
}

double hr_or_floor(const prep::Waveform& w) {
  try {
    return eval::estimate_hr(w).bpm;
  } catch (const eval::NoPeakError&) {
    return 60.0 * prep::kMinPulseHz;
  }
}

}  // namespace

int exit_code(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    switch (err->kind()) {
      case ErrorKind::kConfig: return kExitConfig;
      case ErrorKind::kValidation: return kExitValidation;
      case ErrorKind::kNumerical: return kExitNumerical;
      case ErrorKind::kIo: return kExitIo;
    }
  }
  if (dynamic_cast<const nlohmann::json::exception*>(&e)) return kExitConfig;
  return kExitIo;
}

std::vector<prep::ManifestRow> synth_rows(const RunConfig& config) {
  const std::size_t counts[] = {config.get_uint("data.train_clips"),
                                config.get_uint("data.val_clips"),
                                config.get_uint("data.test_clips")};
  const char* names[] = {"train", "val", "test"};
  const double lo = config.get_double("data.freq_min");
  const double hi = config.get_double("data.freq_max");
  if (counts[0] + counts[1] + counts[2] == 0) throw ConfigError("no clips requested");
  if (lo > hi) throw ConfigError("data.freq_min exceeds data.freq_max");

  std::mt19937_64 gen(config.get_uint("seed"));
  std::vector<prep::ManifestRow> rows;
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t i = 0; i < counts[s]; ++i) {
      prep::ManifestRow row;
      char id[32];
      std::snprintf(id, sizeof(id), "clip%03zu", rows.size());
      row.clip_id = id;
      row.seed = gen();
      // 53 random bits mapped to [0, 1); avoids library-specific distributions.
      const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
      row.pulse_frequency_hz = lo + (hi - lo) * u;
      row.noise_std = config.get_double("data.noise_std");
      row.motion_amplitude = config.get_double("data.motion_amplitude");
      row.split = names[s];

      prep::SynthParams p;
      p.pulse_frequency = row.pulse_frequency_hz;
      p.amplitude = config.get_double("data.amplitude");
      p.noise_std = row.noise_std;
      p.motion_amplitude = row.motion_amplitude;
      p.baseline = config.get_double("data.baseline");
      p.validate();
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void cmd_synth(const Context& ctx) {
  const auto rows = synth_rows(ctx.config);
  const fs::path path = manifest_path(ctx);
  prep::write_manifest(path.string(), rows);
  say(ctx, "wrote " + path.string() + ": " + std::to_string(rows.size()) + " clips (" +
               std::to_string(ctx.config.get_uint("data.train_clips")) + " train, " +
               std::to_string(ctx.config.get_uint("data.val_clips")) + " val, " +
               std::to_string(ctx.config.get_uint("data.test_clips")) + " test)");
}

void cmd_train(const Context& ctx) {
  const model::ModelConfig mc = ctx.config.model_config();
  mc.validate();  // schedule problems surface before any data work
  const model::TrainConfig tc = ctx.config.train_config();
  const auto rows = read_rows(ctx);
  const auto train_set = split_samples(rows, "train", ctx, mc);
  const auto val_set = model::load_split(rows, "val", ctx.config.data_spec(), mc);

  std::optional<model::Checkpoint> resume;
  model::ModelState init;
  const std::string resume_path = ctx.config.get_string("train.resume");
  if (!resume_path.empty()) {
    resume = model::load_checkpoint(resume_path);
    if (resume->state.config.to_json() != mc.to_json()) {
      throw ValidationError("checkpoint " + resume_path + " was trained with another model config");
    }
    init = resume->state;
    say(ctx, "resuming from step " + std::to_string(resume->step));
  } else {
    init = {mc, model::fit_norm(train_set), model::init_params(mc, tc.seed)};
  }

  const model::TrainResult result = model::train(init, tc, train_set, val_set, resume);
  model::save_checkpoint((ctx.out_dir / "checkpoint.bin").string(), result.checkpoint);
  model::write_train_log((ctx.out_dir / "train_log.csv").string(), result.log,
                         ctx.config.get_bool("log.wallclock"));
  for (const auto& r : result.log) {
    say(ctx, "epoch " + std::to_string(r.epoch) + " " + r.split + " loss " + fmt(r.loss));
  }
  say(ctx, "step " + std::to_string(result.checkpoint.step) + ", wrote " +
               (ctx.out_dir / "checkpoint.bin").string());
}

void cmd_eval(const Context& ctx) {
  const std::string ck = ctx.config.get_string("eval.checkpoint");
  const fs::path ck_path = ck.empty() ? ctx.out_dir / "checkpoint.bin" : fs::path(ck);
  if (!fs::exists(ck_path)) throw IoError("checkpoint " + ck_path.string() + " not found");
  const model::Checkpoint ckpt = model::load_checkpoint(ck_path.string());
  const model::ModelConfig mc = ctx.config.model_config();
  if (ckpt.state.config.to_json() != mc.to_json()) {
    throw ValidationError("model config does not match checkpoint " + ck_path.string());
  }
  const std::string split = ctx.config.get_string("eval.split");
  const auto samples = split_samples(read_rows(ctx), split, ctx, mc);
  const eval::EvalResult res = eval::evaluate(ckpt.state, samples);

  std::vector<double> pos_bpm, gt_bpm;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& clip = samples[i].clip;
    pos_bpm.push_back(hr_or_floor(
        eval::pos_baseline(eval::spatial_mean_trace(clip), clip.frame_rate)));
    gt_bpm.push_back(res.clips[i].gt_bpm);
  }
  const eval::MetricsReport pos = eval::compute_metrics(pos_bpm, gt_bpm);

  CsvFile metrics(ctx.out_dir / "metrics.csv",
                  "method,split,clips,mae,mape,rmse,pearson,mean_loss");
  auto pearson = [](const eval::MetricsReport& m) {
    return m.pearson ? fmt(*m.pearson) : std::string();
  };
  metrics.row("bts", split, samples.size(), fmt(res.metrics.mae), fmt(res.metrics.mape),
              fmt(res.metrics.rmse), pearson(res.metrics), fmt(res.mean_loss));
  metrics.row("pos", split, samples.size(), fmt(pos.mae), fmt(pos.mape), fmt(pos.rmse),
              pearson(pos), "");
  metrics.close();

  CsvFile clips(ctx.out_dir / "eval_clips.csv", "clip_id,gt_bpm,pred_bpm,pos_bpm,loss");
  CsvFile waves(ctx.out_dir / "waveforms.csv", "clip_id,frame,prediction,target");
  for (std::size_t i = 0; i < res.clips.size(); ++i) {
    const auto& c = res.clips[i];
    clips.row(c.id, fmt(c.gt_bpm), fmt(c.pred_bpm), fmt(pos_bpm[i]), fmt(c.loss));
    for (std::size_t t = 0; t < c.prediction.samples.size(); ++t) {
      waves.row(c.id, t, fmt(c.prediction.samples[t]), fmt(c.target.samples[t]));
    }
  }
  clips.close();
  waves.close();

  if (ctx.config.get_bool("eval.svg") && !res.clips.empty()) {
    const auto& c = res.clips.front();
    std::vector<double> x;
    for (std::size_t t = 0; t < c.prediction.samples.size(); ++t) {
      x.push_back(static_cast<double>(t) / c.prediction.frame_rate);
    }
    write_text((ctx.out_dir / "waveforms.svg").string(),
               line_plot(c.id + " (standardized)", "time [s]", "signal",
                         {{"prediction", x, standardized(c.prediction.samples)},
                          {"reference", x, standardized(c.target.samples)}}));
  }
  say(ctx, split + ": MAE " + fmt(res.metrics.mae) + " RMSE " + fmt(res.metrics.rmse) +
               " loss " + fmt(res.mean_loss) + " | POS MAE " + fmt(pos.mae));
}

bool cmd_gradcheck(const Context& ctx) {
  ad::GradCheckOptions opt;
  opt.step = ctx.config.get_double("gradcheck.step");
  opt.tolerance = ctx.config.get_double("gradcheck.tolerance");
  opt.abs_floor = ctx.config.get_double("gradcheck.abs_floor");
  const std::size_t draws = ctx.config.get_uint("gradcheck.draws");
  if (draws == 0) throw ConfigError("gradcheck.draws must be positive");
  const auto targets = run_gradcheck(ctx.config.get_uint("seed"), draws, opt,
                                     ctx.config.get_string("gradcheck.inject_fault"));
  CsvFile csv(ctx.out_dir / "gradcheck.csv", "target,max_rel_error,evaluations,passed");
  bool ok = true;
  for (const auto& t : targets) {
    csv.row(t.name, fmt(t.report.max_rel_error), t.report.evaluations,
            t.report.passed ? "true" : "false");
    char line[128];
    std::snprintf(line, sizeof(line), "%-14s max_rel_error %.3e  %s", t.name.c_str(),
                  t.report.max_rel_error, t.report.passed ? "PASS" : "FAIL");
    say(ctx, line);
    ok = ok && t.report.passed;
  }
  csv.close();
  return ok;
}

void cmd_analyze_schedule(const Context& ctx) {
  const model::ModelConfig mc = ctx.config.model_config();
  const auto names = ctx.config.get_string_list("analyze.variants");
  if (names.empty()) throw ConfigError("analyze.variants is empty");
  std::vector<sched::ButterflySchedule> schedules;
  for (const auto& name : names) {
    sched::Variant v;
    try {
      v = sched::parse_variant(name);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    schedules.push_back(sched::ButterflySchedule::build(v, mc.stages, mc.clip_length,
                                                        mc.resolved_cycles()));
  }
  const auto report = sched::schedule_report(schedules);

  CsvFile csv(ctx.out_dir / "schedule.csv", "variant,cycle,stage,min,mean,max");
  std::vector<Series> series;
  for (const auto& s : report) {
    Series line{s.variant, {0.0}, {1.0}};
    for (std::size_t i = 0; i < s.report.steps.size(); ++i) {
      const auto& st = s.report.steps[i];
      csv.row(s.variant, st.cycle, st.stage, st.min_size, fmt(st.mean_size), st.max_size);
      line.x.push_back(static_cast<double>(i + 1));
      line.y.push_back(st.mean_size);
    }
    series.push_back(std::move(line));
    const auto& last = s.report.steps.back();
    say(ctx, s.variant + ": reachable set after last stage min " +
                 std::to_string(last.min_size) + " max " + std::to_string(last.max_size) +
                 " of " + std::to_string(s.report.clip_length));
  }
  csv.close();
  if (ctx.config.get_bool("analyze.svg")) {
    write_text((ctx.out_dir / "schedule.svg").string(),
               line_plot("reachable-set growth, T=" + std::to_string(mc.clip_length),
                         "stage", "mean reachable frames", series));
  }
}

void cmd_ablate(const Context& ctx) {
  const model::ModelConfig base = ctx.config.model_config();
  const model::TrainConfig tc = ctx.config.train_config();
  const std::string sweep = ctx.config.get_string("ablate.sweep");
  if (sweep != "schedule" && sweep != "fold" && sweep != "both") {
    throw ConfigError("ablate.sweep must be schedule, fold or both");
  }
  const std::size_t n_seeds = ctx.config.get_uint("ablate.seeds");
  if (n_seeds == 0) throw ConfigError("ablate.seeds must be positive");
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < n_seeds; ++i) seeds.push_back(tc.seed + i);

  const auto rows = read_rows(ctx);
  const auto train_set = split_samples(rows, "train", ctx, base);
  const auto test_set = split_samples(rows, "test", ctx, base);

  std::vector<std::pair<std::string, std::vector<eval::AblationVariant>>> sweeps;
  if (sweep != "fold") sweeps.emplace_back("schedule", eval::schedule_variants(base));
  if (sweep != "schedule") sweeps.emplace_back("fold", eval::fold_ratio_variants(base));

  CsvFile runs(ctx.out_dir / "ablation_runs.csv",
               "sweep,variant,seed,init_hash,final_train_loss,test_loss,mae,mape,rmse,pearson");
  CsvFile summary(ctx.out_dir / "ablation_summary.csv",
                  "sweep,variant,runs,rmse_mean,rmse_std,mae_mean,mae_std");
  for (const auto& [name, variants] : sweeps) {
    const auto table = eval::run_ablation(variants, tc, seeds, train_set, test_set, tc.threads);
    for (const auto& r : table.runs) {
      runs.row(name, r.variant, r.seed, hex(r.init_hash), fmt(r.final_train_loss),
               fmt(r.test_loss), fmt(r.metrics.mae), fmt(r.metrics.mape), fmt(r.metrics.rmse),
               r.metrics.pearson ? fmt(*r.metrics.pearson) : std::string());
    }
    std::vector<Bar> bars;
    for (const auto& s : table.summary) {
      summary.row(name, s.variant, s.runs, fmt(s.rmse_mean), fmt(s.rmse_std),
                  fmt(s.mae_mean), fmt(s.mae_std));
      bars.push_back({s.variant, s.rmse_mean, s.rmse_std});
      char line[160];
      std::snprintf(line, sizeof(line), "%-8s %-18s RMSE %.3f +- %.3f  MAE %.3f +- %.3f",
                    name.c_str(), s.variant.c_str(), s.rmse_mean, s.rmse_std, s.mae_mean,
                    s.mae_std);
      say(ctx, line);
    }
    if (ctx.config.get_bool("ablate.svg")) {
      write_text((ctx.out_dir / ("ablation_" + name + ".svg")).string(),
                 bar_chart(name + " ablation, " + std::to_string(n_seeds) + " seeds",
                           "held-out HR RMSE [bpm]", bars));
    }
  }
  runs.close();
  summary.close();
}

int run_command(const std::string& command, const Context& ctx, std::ostream& err) {
  try {
    if (ctx.config.get_uint("precision") != 64) {
      throw ConfigError("only 64-bit precision is implemented");
    }
    fs::create_directories(ctx.out_dir);
    ctx.config.write((ctx.out_dir / (command + ".resolved.json")).string());
    if (command == "synth") {
      cmd_synth(ctx);
    } else if (command == "train") {
      cmd_train(ctx);
    } else if (command == "eval") {
      cmd_eval(ctx);
    } else if (command == "gradcheck") {
      if (!cmd_gradcheck(ctx)) {
        err << "error: gradient check failed\n";
        return kExitNumerical;
      }
    } else if (command == "analyze-schedule") {
      cmd_analyze_schedule(ctx);
    } else if (command == "ablate") {
      cmd_ablate(ctx);
    } else {
      throw ConfigError("unknown command '" + command + "'");
    }
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e);
  }
}

}  // namespace bts::app
