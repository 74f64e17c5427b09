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

#include "bts/config.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "bts/error.hpp"

namespace bts::app {

namespace {

using nlohmann::json;

enum class Kind { kUInt, kDouble, kBool, kString, kUIntList, kStringList };

struct KeySpec {
  Kind kind;
  json value;
};

const std::map<std::string, KeySpec>& key_table() {
  static const std::map<std::string, KeySpec> table = {
      {"seed", {Kind::kUInt, 0}},
      {"threads", {Kind::kUInt, 1}},
      {"precision", {Kind::kUInt, 64}},
      {"log.wallclock", {Kind::kBool, false}},

      {"model.clip_length", {Kind::kUInt, 64}},
      {"model.height", {Kind::kUInt, 8}},
      {"model.width", {Kind::kUInt, 8}},
      {"model.patch", {Kind::kUInt, 4}},
      {"model.channels", {Kind::kUInt, 32}},
      {"model.heads", {Kind::kUInt, 4}},
      {"model.stages", {Kind::kUInt, 6}},
      {"model.mlp_ratio", {Kind::kUInt, 4}},
      {"model.fold_ratio", {Kind::kDouble, 0.25}},
      {"model.frame_rate", {Kind::kDouble, 30.0}},
      {"model.bts_enabled", {Kind::kBool, true}},
      {"model.share_projections", {Kind::kBool, false}},
      {"model.projection_init", {Kind::kString, "xavier"}},

      {"schedule.variant", {Kind::kString, "butterfly"}},
      {"schedule.cycles", {Kind::kUIntList, json::array()}},

      {"data.manifest", {Kind::kString, ""}},
      {"data.train_clips", {Kind::kUInt, 16}},
      {"data.val_clips", {Kind::kUInt, 4}},
      {"data.test_clips", {Kind::kUInt, 4}},
      {"data.freq_min", {Kind::kDouble, 0.8}},
      {"data.freq_max", {Kind::kDouble, 2.5}},
      {"data.noise_std", {Kind::kDouble, 0.01}},
      {"data.motion_amplitude", {Kind::kDouble, 0.02}},
      {"data.amplitude", {Kind::kDouble, 0.02}},
      {"data.baseline", {Kind::kDouble, 0.5}},
      {"data.sequence_length", {Kind::kUInt, 0}},
      {"data.window_stride", {Kind::kUInt, 96}},

      {"train.epochs", {Kind::kUInt, 30}},
      {"train.batch_size", {Kind::kUInt, 2}},
      {"train.lr", {Kind::kDouble, 1e-3}},
      {"train.final_lr_ratio", {Kind::kDouble, 0.01}},
      {"train.weight_decay", {Kind::kDouble, 0.01}},
      {"train.beta1", {Kind::kDouble, 0.9}},
      {"train.beta2", {Kind::kDouble, 0.999}},
      {"train.adam_eps", {Kind::kDouble, 1e-8}},
      {"train.augment_flip", {Kind::kBool, true}},
      {"train.resume", {Kind::kString, ""}},

      {"eval.checkpoint", {Kind::kString, ""}},
      {"eval.split", {Kind::kString, "test"}},
      {"eval.svg", {Kind::kBool, true}},

      {"gradcheck.draws", {Kind::kUInt, 2}},
      {"gradcheck.step", {Kind::kDouble, 1e-6}},
      {"gradcheck.tolerance", {Kind::kDouble, 1e-4}},
      {"gradcheck.abs_floor", {Kind::kDouble, 1e-4}},
      {"gradcheck.inject_fault", {Kind::kString, ""}},

      {"analyze.variants",
       {Kind::kStringList,
        json::array({"local-only", "linear", "reverse-butterfly", "butterfly"})}},
      {"analyze.svg", {Kind::kBool, true}},

      {"ablate.sweep", {Kind::kString, "schedule"}},
      {"ablate.seeds", {Kind::kUInt, 5}},
      {"ablate.svg", {Kind::kBool, true}},
  };
  return table;
}

bool matches(Kind kind, const json& v) {
  switch (kind) {
    case Kind::kUInt:
      return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    case Kind::kDouble:
      return v.is_number();
    case Kind::kBool:
      return v.is_boolean();
    case Kind::kString:
      return v.is_string();
    case Kind::kUIntList:
      if (!v.is_array()) return false;
      for (const auto& e : v) {
        if (!matches(Kind::kUInt, e)) return false;
      }
      return true;
    case Kind::kStringList:
      if (!v.is_array()) return false;
      for (const auto& e : v) {
        if (!e.is_string()) return false;
      }
      return true;
  }
  return false;
}

const char* kind_name(Kind kind) {
  switch (kind) {
    case Kind::kUInt: return "a non-negative integer";
    case Kind::kDouble: return "a number";
    case Kind::kBool: return "a boolean";
    case Kind::kString: return "a string";
    case Kind::kUIntList: return "a list of non-negative integers";
    case Kind::kStringList: return "a list of strings";
  }
  return "?";
}

}  // namespace

RunConfig::RunConfig() : values_(json::object()) {
  for (const auto& [key, spec] : key_table()) values_[key] = spec.value;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config " + path);
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  RunConfig cfg;
  cfg.merge(doc);
  return cfg;
}

void RunConfig::merge(const json& overrides) {
  if (!overrides.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : overrides.items()) set(key, value);
}

void RunConfig::set(const std::string& key, const json& value) {
  const auto it = key_table().find(key);
  if (it == key_table().end()) throw ConfigError("unknown config key '" + key + "'");
  if (!matches(it->second.kind, value)) {
    throw ConfigError("config key '" + key + "' must be " + kind_name(it->second.kind) +
                      ", got " + value.dump());
  }
  // Integers given for real-valued keys are stored as reals so the resolved
  // config prints one canonical form.
  values_[key] = it->second.kind == Kind::kDouble ? json(value.get<double>()) : value;
}

void RunConfig::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("expected key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  set(key, value);
}

const json& RunConfig::at(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return *it;
}

std::uint64_t RunConfig::get_uint(const std::string& key) const {
  return at(key).get<std::uint64_t>();
}
double RunConfig::get_double(const std::string& key) const { return at(key).get<double>(); }
bool RunConfig::get_bool(const std::string& key) const { return at(key).get<bool>(); }
std::string RunConfig::get_string(const std::string& key) const {
  return at(key).get<std::string>();
}
std::vector<std::uint64_t> RunConfig::get_uint_list(const std::string& key) const {
  return at(key).get<std::vector<std::uint64_t>>();
}
std::vector<std::string> RunConfig::get_string_list(const std::string& key) const {
  return at(key).get<std::vector<std::string>>();
}

std::string RunConfig::dump() const { return values_.dump(2) + "\n"; }

void RunConfig::write(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << dump();
  if (!os) throw IoError("write failed: " + path);
}

model::ModelConfig RunConfig::model_config() const {
  model::ModelConfig m;
  m.clip_length = get_uint("model.clip_length");
  m.height = get_uint("model.height");
  m.width = get_uint("model.width");
  m.patch = get_uint("model.patch");
  m.channels = get_uint("model.channels");
  m.heads = get_uint("model.heads");
  m.stages = get_uint("model.stages");
  m.mlp_ratio = get_uint("model.mlp_ratio");
  m.fold_ratio = get_double("model.fold_ratio");
  m.frame_rate = get_double("model.frame_rate");
  m.bts_enabled = get_bool("model.bts_enabled");
  m.share_projections = get_bool("model.share_projections");
  m.projection_init = get_string("model.projection_init");
  try {
    m.variant = sched::parse_variant(get_string("schedule.variant"));
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  for (auto c : get_uint_list("schedule.cycles")) m.cycles.push_back(c);
  return m;
}

model::TrainConfig RunConfig::train_config() const {
  model::TrainConfig t;
  t.epochs = get_uint("train.epochs");
  t.batch_size = get_uint("train.batch_size");
  t.lr = get_double("train.lr");
  t.final_lr_ratio = get_double("train.final_lr_ratio");
  t.weight_decay = get_double("train.weight_decay");
  t.beta1 = get_double("train.beta1");
  t.beta2 = get_double("train.beta2");
  t.adam_eps = get_double("train.adam_eps");
  t.augment_flip = get_bool("train.augment_flip");
  t.threads = get_uint("threads");
  t.seed = get_uint("seed");
  if (t.epochs == 0 || t.batch_size == 0) {
    throw ConfigError("train.epochs and train.batch_size must be positive");
  }
  if (!(t.lr > 0.0) || !(t.final_lr_ratio > 0.0) || t.weight_decay < 0.0) {
    throw ConfigError("train.lr and train.final_lr_ratio must be positive, weight_decay >= 0");
  }
  if (t.threads == 0) throw ConfigError("threads must be positive");
  return t;
}

model::DataSpec RunConfig::data_spec() const {
  model::DataSpec d;
  d.amplitude = get_double("data.amplitude");
  d.baseline = get_double("data.baseline");
  d.sequence_length = get_uint("data.sequence_length");
  d.window_stride = get_uint("data.window_stride");
  if (d.window_stride == 0) throw ConfigError("data.window_stride must be positive");
  return d;
}

}  // namespace bts::app
