// Copyright 2026 The starcd Authors
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

#include "starcd/harness/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "starcd/harness/trainer.hpp"

namespace starcd::harness {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'S', 'T', 'A', 'R', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  template <typename V>
  void pod(V v) {
    bytes(&v, sizeof v);
  }
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void str32(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  const std::vector<char>& buffer() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> buf) : buf_(std::move(buf)) {}

  template <typename V>
  V pod() {
    V v;
    bytes(&v, sizeof v);
    return v;
  }
  void bytes(void* p, std::size_t n) {
    check(pos_ + n <= buf_.size(), ErrorKind::data, "checkpoint is truncated");
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::string str(std::size_t n) {
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  std::size_t pos() const { return pos_; }
  const std::vector<char>& buffer() const { return buf_; }

 private:
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

std::uint64_t fnv1a(const char* p, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(p[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct Entry {
  std::uint8_t kind;
  Tensor<float>* tensor;
};

std::map<std::string, Entry> collect(model::ChangeStar<float>& net) {
  std::map<std::string, Entry> out;
  net.visit({[&](const std::string& name, nn::Parameter<float>& p) { out[name] = {0, &p.value}; },
             [&](const std::string& name, Tensor<float>& t) { out[name] = {1, &t}; }});
  return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, model::ChangeStar<float>& net, const TrainConfig& cfg,
                     int step) {
  const auto entries = collect(net);
  const nlohmann::json manifest = {{"format", "starcd-checkpoint"},
                                   {"config", cfg.to_toml()},
                                   {"config_hash", cfg.hash()},
                                   {"step", step},
                                   {"seed", cfg.seed},
                                   {"tensor_count", entries.size()}};
  const std::string text = manifest.dump();
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.pod(kVersion);
  w.pod(static_cast<std::uint64_t>(text.size()));
  w.bytes(text.data(), text.size());
  w.pod(static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, e] : entries) {
    w.str32(name);
    w.pod(e.kind);
    const Shape s = e.tensor->shape();
    for (int d : {s.n, s.c, s.h, s.w}) w.pod(static_cast<std::uint32_t>(d));
    w.bytes(e.tensor->data(), e.tensor->size() * sizeof(float));
  }
  w.pod(fnv1a(w.buffer().data(), w.buffer().size()));

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    check(out.good(), ErrorKind::io, "cannot write " + tmp.string());
    out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
    check(out.good(), ErrorKind::io, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), ErrorKind::data, "cannot open checkpoint " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  check(buf.size() >= sizeof kMagic + 4 + 8 + 8, ErrorKind::data, "checkpoint is truncated");
  std::uint64_t stored;
  std::memcpy(&stored, buf.data() + buf.size() - 8, 8);
  check(stored == fnv1a(buf.data(), buf.size() - 8), ErrorKind::data, "checkpoint checksum mismatch");
  buf.resize(buf.size() - 8);

  Reader r(std::move(buf));
  check(r.str(8) == std::string(kMagic, 8), ErrorKind::data, "not a starcd checkpoint");
  const auto version = r.pod<std::uint32_t>();
  check(version == kVersion, ErrorKind::data, "unsupported checkpoint version " + std::to_string(version));
  const auto manifest_len = r.pod<std::uint64_t>();
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(r.str(manifest_len));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::data, std::string("checkpoint manifest is not JSON: ") + e.what());
  }

  LoadedCheckpoint out;
  try {
    out.info.config = TrainConfig::parse(manifest.at("config").get<std::string>());
    out.info.config_hash = manifest.at("config_hash").get<std::string>();
    out.info.step = manifest.at("step").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::data, std::string("checkpoint manifest is incomplete: ") + e.what());
  }
  check(out.info.config.hash() == out.info.config_hash, ErrorKind::data, "checkpoint config hash mismatch");
  out.model = make_model(out.info.config);
  auto entries = collect(*out.model);

  const auto count = r.pod<std::uint32_t>();
  check(count == entries.size(), ErrorKind::data,
        "checkpoint holds " + std::to_string(count) + " tensors, model has " + std::to_string(entries.size()));
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str(r.pod<std::uint32_t>());
    const auto kind = r.pod<std::uint8_t>();
    Shape s;
    s.n = static_cast<int>(r.pod<std::uint32_t>());
    s.c = static_cast<int>(r.pod<std::uint32_t>());
    s.h = static_cast<int>(r.pod<std::uint32_t>());
    s.w = static_cast<int>(r.pod<std::uint32_t>());
    const auto it = entries.find(name);
    check(it != entries.end(), ErrorKind::data, "checkpoint tensor '" + name + "' is unknown to the model");
    check(it->second.kind == kind, ErrorKind::data, "checkpoint tensor '" + name + "' has the wrong kind");
    check(it->second.tensor->shape() == s, ErrorKind::data,
          "checkpoint tensor '" + name + "' has shape " + to_string(s) + ", model expects " +
              to_string(it->second.tensor->shape()));
    r.bytes(it->second.tensor->data(), it->second.tensor->size() * sizeof(float));
  }
  check(r.pos() == r.buffer().size(), ErrorKind::data, "trailing bytes after the last tensor");
  return out;
}

}  // namespace starcd::harness
