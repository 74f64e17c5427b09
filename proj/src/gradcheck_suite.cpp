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

// Finite-difference targets used by `bts gradcheck`.

#include <algorithm>
#include <random>

#include "bts/app.hpp"
#include "bts/bts_oft.hpp"
#include "bts/error.hpp"
#include "bts/model.hpp"
#include "bts/ops.hpp"

namespace bts::app {

namespace {

using ad::Tensor;

Tensor randn(std::mt19937_64& gen, ad::Shape shape, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(ad::shape_numel(shape));
  for (double& x : v) x = dist(gen);
  return Tensor::from(std::move(shape), std::move(v));
}

// Identity forward whose backward scales the gradient by 1.5.
Tensor faulty_identity(const Tensor& a) {
  Tensor out = ad::make_result(a.shape(), a.values());
  if (ad::should_record({&a})) {
    auto ai = a.impl(), oi = out.impl();
    ad::active_tape()->record("faulty_identity", {a}, out, [ai, oi] {
      auto& g = ai->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += 1.5 * oi->grad[i];
    });
  }
  return out;
}

// A weighted sum turns a tensor-valued op into a scalar with a generic
// upstream gradient.
Tensor probe(const Tensor& y, const Tensor& weights) { return ad::sum_all(y * weights); }

struct Problem {
  ad::ScalarFunction f;
  std::vector<Tensor> inputs;
};

model::ModelConfig micro_config() {
  model::ModelConfig c;
  c.clip_length = 8;
  c.height = 2;
  c.width = 2;
  c.patch = 2;  // one token per frame
  c.channels = 8;
  // One head keeps the fold two channels wide. A one-channel fold turns the
  // exchange into a*eps/(b^2+eps), whose curvature near |b| ~ 1e-3 swamps
  // central differences.
  c.heads = 1;
  c.stages = 3;
  c.fold_ratio = 0.25;
  return c;
}

Problem make_problem(const std::string& name, std::mt19937_64& gen) {
  if (name == "oft") {
    const Tensor w = randn(gen, {3, 2, 5});
    return {[w](const std::vector<Tensor>& x) { return probe(oft::oft(x[0], x[1]), w); },
            {randn(gen, {3, 2, 5}), randn(gen, {3, 2, 5})}};
  }
  if (name == "bts_apply") {
    const oft::OftConfig cfg = oft::OftConfig::from_ratio(8, 2, 0.25);
    const auto schedule =
        sched::ButterflySchedule::build(sched::Variant::kButterfly, 3, 8, {0});
    const Tensor w = randn(gen, {8, 2, 8});
    return {[=](const std::vector<Tensor>& x) {
              return probe(oft::bts_apply(x[0], schedule, 0, 2, x[1], cfg), w);
            },
            {randn(gen, {8, 2, 8}), randn(gen, cfg.projection_shape(), 0.5)}};
  }
  if (name == "layer_norm") {
    const Tensor w = randn(gen, {4, 6});
    return {[w](const std::vector<Tensor>& x) {
              return probe(ad::layer_norm(x[0], x[1], x[2]), w);
            },
            {randn(gen, {4, 6}), randn(gen, {6}), randn(gen, {6})}};
  }
  if (name == "msa") {
    const Tensor w = randn(gen, {4, 3, 8});
    return {[w](const std::vector<Tensor>& x) {
              return probe(model::msa(x[0], x[1], x[2], 2, x[3], x[4]), w);
            },
            {randn(gen, {4, 3, 8}), randn(gen, {4, 3, 8}), randn(gen, {4, 3, 8}),
             randn(gen, {8, 8}, 0.3), randn(gen, {8})}};
  }
  if (name == "pearson_loss") {
    return {[](const std::vector<Tensor>& x) { return model::pearson_loss(x[0], x[1]); },
            {randn(gen, {16}), randn(gen, {16})}};
  }
  if (name == "end_to_end") {
    const model::ModelConfig cfg = micro_config();
    prep::SynthParams sp;
    sp.seed = gen();
    auto [clip, wave] = prep::synth_clip(sp, {cfg.clip_length, cfg.height, cfg.width, 30.0});
    const Tensor target = Tensor::from({wave.samples.size()}, wave.samples);
    const model::ParamMap init = model::init_params(cfg, gen());
    std::vector<std::string> keys;
    std::vector<Tensor> inputs;
    for (const auto& [k, v] : init) {
      keys.push_back(k);
      // Perturb so biases and gains are not at their symmetric defaults.
      Tensor t = v.detach();
      std::normal_distribution<double> jitter(0.0, 0.05);
      for (double& e : t.mutable_data()) e += jitter(gen);
      inputs.push_back(t);
    }
    const prep::InputNorm norm;
    return {[=](const std::vector<Tensor>& x) {
              model::ParamMap p;
              for (std::size_t i = 0; i < keys.size(); ++i) p.emplace(keys[i], x[i]);
              return model::pearson_loss(model::model_forward(clip, p, cfg, norm), target);
            },
            inputs};
  }
  throw ConfigError("unknown gradcheck target '" + name + "'");
}

}  // namespace

const std::vector<std::string>& gradcheck_target_names() {
  static const std::vector<std::string> names = {"oft",          "bts_apply",
                                                 "layer_norm",   "msa",
                                                 "pearson_loss", "end_to_end"};
  return names;
}

std::vector<GradTarget> run_gradcheck(std::uint64_t seed, std::size_t draws,
                                      const ad::GradCheckOptions& options,
                                      const std::string& inject_fault) {
  const auto& names = gradcheck_target_names();
  if (!inject_fault.empty() &&
      std::find(names.begin(), names.end(), inject_fault) == names.end()) {
    throw ConfigError("gradcheck.inject_fault names unknown target '" + inject_fault + "'");
  }
  std::vector<GradTarget> out;
  for (std::size_t ti = 0; ti < names.size(); ++ti) {
    GradTarget target{names[ti], {}};
    target.report.passed = true;
    for (std::size_t d = 0; d < draws; ++d) {
      std::seed_seq sseq{seed, static_cast<std::uint64_t>(ti), static_cast<std::uint64_t>(d)};
      std::mt19937_64 gen(sseq);
      Problem p = make_problem(names[ti], gen);
      ad::ScalarFunction f = p.f;
      if (names[ti] == inject_fault) {
        f = [inner = p.f](const std::vector<Tensor>& x) { return faulty_identity(inner(x)); };
      }
      const ad::GradCheckReport r = ad::grad_check(f, p.inputs, options);
      target.report.evaluations += r.evaluations;
      target.report.passed = target.report.passed && r.passed;
      if (r.max_rel_error >= target.report.max_rel_error) {
        target.report.max_rel_error = r.max_rel_error;
        target.report.per_input = r.per_input;
      }
    }
    out.push_back(std::move(target));
  }
  return out;
}

}  // namespace bts::app
