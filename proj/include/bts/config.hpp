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

// Run configuration: a flat JSON object with dotted keys. Every key has a
// documented default (see docs/config.md); unknown keys are rejected.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "bts/dataset.hpp"
#include "bts/model.hpp"
#include "bts/train.hpp"

namespace bts::app {

class RunConfig {
 public:
  /// All keys at their defaults.
  RunConfig();

  /// Defaults overlaid with the keys of a JSON file.
  static RunConfig load(const std::string& path);

  /// Overlays a flat JSON object. Throws ConfigError on unknown keys or
  /// values of the wrong type.
  void merge(const nlohmann::json& overrides);
  /// "key=value"; the value is parsed as JSON, falling back to a plain string.
  void set(const std::string& assignment);
  void set(const std::string& key, const nlohmann::json& value);

  std::uint64_t get_uint(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::vector<std::uint64_t> get_uint_list(const std::string& key) const;
  std::vector<std::string> get_string_list(const std::string& key) const;

  /// Keys sorted, two-space indentation, trailing newline.
  std::string dump() const;
  void write(const std::string& path) const;

  const nlohmann::json& values() const { return values_; }

  model::ModelConfig model_config() const;
  model::TrainConfig train_config() const;
  model::DataSpec data_spec() const;

 private:
  const nlohmann::json& at(const std::string& key) const;

  nlohmann::json values_;
};

}  // namespace bts::app
