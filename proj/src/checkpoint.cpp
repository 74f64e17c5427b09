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

#include <cstring>
#include <fstream>

#include "bts/error.hpp"
#include "bts/train.hpp"

namespace bts::model {

namespace {

constexpr char kMagic[8] = {'B', 'T', 'S', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(const std::string& path) : os_(path, std::ios::binary) {
    if (!os_) throw IoError("cannot write checkpoint " + path);
  }
  void bytes(const void* p, std::size_t n) { os_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void u32(std::uint32_t v) { bytes(&v, sizeof(v)); }
  void u64(std::uint64_t v) { bytes(&v, sizeof(v)); }
  void f64(double v) { bytes(&v, sizeof(v)); }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void tensor(const std::string& key, const ad::Tensor& t) {
    str(key);
    u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) u64(e);
    bytes(t.data().data(), t.numel() * sizeof(double));
  }
  void finish() {
    os_.flush();
    if (!os_) throw IoError("checkpoint write failed");
  }

 private:
  std::ofstream os_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : is_(path, std::ios::binary) {
    if (!is_) throw IoError("cannot read checkpoint " + path);
  }
  void bytes(void* p, std::size_t n) {
    is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!is_) throw ValidationError("checkpoint truncated");
  }
  std::uint32_t u32() { std::uint32_t v; bytes(&v, sizeof(v)); return v; }
  std::uint64_t u64() { std::uint64_t v; bytes(&v, sizeof(v)); return v; }
  double f64() { double v; bytes(&v, sizeof(v)); return v; }
  std::string str() {
    const std::uint64_t n = u64();
    if (n > (1u << 26)) throw ValidationError("checkpoint string too long");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  std::pair<std::string, ad::Tensor> tensor() {
    std::string key = str();
    const std::uint32_t rank = u32();
    if (rank > 8) throw ValidationError("checkpoint tensor rank too large");
    ad::Shape shape(rank);
    for (auto& e : shape) e = u64();
    const std::size_t n = ad::shape_numel(shape);
    if (n > (1u << 28)) throw ValidationError("checkpoint tensor too large");
    std::vector<double> values(n);
    bytes(values.data(), n * sizeof(double));
    return {std::move(key), ad::Tensor::from(std::move(shape), std::move(values))};
  }

 private:
  std::ifstream is_;
};

void write_group(Writer& w, const std::string& prefix, const ParamMap& params) {
  for (const auto& [k, v] : params) w.tensor(prefix + k, v);
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  Writer w(path);
  w.bytes(kMagic, sizeof(kMagic));
  w.u32(kVersion);
  w.str(ckpt.state.config.to_json());
  w.u64(ckpt.step);
  w.str(ckpt.rng_state);
  for (double v : ckpt.state.norm.mean) w.f64(v);
  for (double v : ckpt.state.norm.stddev) w.f64(v);
  w.u64(ckpt.state.params.size() + ckpt.adam_m.size() + ckpt.adam_v.size());
  write_group(w, "param/", ckpt.state.params);
  write_group(w, "adam_m/", ckpt.adam_m);
  write_group(w, "adam_v/", ckpt.adam_v);
  w.finish();
}

Checkpoint load_checkpoint(const std::string& path) {
  Reader r(path);
  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ValidationError(path + " is not a checkpoint");
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw ValidationError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.state.config = ModelConfig::from_json(r.str());
  ck.step = r.u64();
  ck.rng_state = r.str();
  for (double& v : ck.state.norm.mean) v = r.f64();
  for (double& v : ck.state.norm.stddev) v = r.f64();
  const std::uint64_t count = r.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    auto [key, tensor] = r.tensor();
    const auto slash = key.find('/');
    const std::string group = key.substr(0, slash);
    const std::string name = slash == std::string::npos ? "" : key.substr(slash + 1);
    if (group == "param") {
      ck.state.params.emplace(name, std::move(tensor));
    } else if (group == "adam_m") {
      ck.adam_m.emplace(name, std::move(tensor));
    } else if (group == "adam_v") {
      ck.adam_v.emplace(name, std::move(tensor));
    } else {
      throw ValidationError("checkpoint entry with unknown group '" + key + "'");
    }
  }
  return ck;
}

}  // namespace bts::model
