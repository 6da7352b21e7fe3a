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

#include "starcd/harness/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <toml.hpp>

namespace starcd::harness {

std::string_view to_string(Supervision s) { return s == Supervision::star ? "star" : "bitemporal"; }

double poly_lr(int step, int max_steps, double base_lr, double gamma) {
  check(max_steps >= 1, ErrorKind::invalid_argument, "max_steps must be positive");
  check(step >= 0 && step <= max_steps, ErrorKind::invalid_argument,
        "step " + std::to_string(step) + " outside [0, " + std::to_string(max_steps) + "]");
  return base_lr * std::pow(1.0 - static_cast<double>(step) / max_steps, gamma);
}

void TrainConfig::validate() const {
  auto need = [](bool ok, const std::string& msg) { check(ok, ErrorKind::config, msg); };
  need(max_steps >= 1, "max_steps must be positive");
  need(base_lr > 0.0 && std::isfinite(base_lr), "base_lr must be positive");
  need(lr_gamma >= 0.0, "lr_gamma must be non-negative");
  need(momentum >= 0.0 && momentum < 1.0, "momentum must lie in [0, 1)");
  need(weight_decay >= 0.0, "weight_decay must be non-negative");
  need(eval_every >= 0, "eval_every must be non-negative");
  need(threads >= 0, "threads must be non-negative");
  need(batch_size >= 2, "batch_size must be at least 2 for batch statistics");
  pairing.validate();
  model.validate();
  augment.validate();
}

namespace {

template <typename E>
struct EnumNames {
  std::map<std::string, E> names;

  E parse(const std::string& key, const std::string& v) const {
    const auto it = names.find(v);
    if (it == names.end()) {
      std::string allowed;
      for (const auto& [n, _] : names) allowed += (allowed.empty() ? "" : ", ") + n;
      throw Error(ErrorKind::config, key + ": unknown value '" + v + "' (expected one of " + allowed + ")");
    }
    return it->second;
  }
  std::string name(E e) const {
    for (const auto& [n, v] : names)
      if (v == e) return n;
    return "?";
  }
};

const EnumNames<Supervision> kSupervision{{{"star", Supervision::star}, {"bitemporal", Supervision::bitemporal}}};
const EnumNames<pairing::JitterStrength> kJitter{
    {{"default", pairing::JitterStrength::default_color_jitter}, {"strong", pairing::JitterStrength::strong}}};
const EnumNames<losses::BinaryChangeLoss> kChangeLoss{
    {{"bce", losses::BinaryChangeLoss::bce}, {"bce_dice", losses::BinaryChangeLoss::bce_plus_soft_dice}}};
const EnumNames<losses::SemanticLoss> kSemLoss{
    {{"bce_dice", losses::SemanticLoss::bce_plus_dice}, {"cross_entropy", losses::SemanticLoss::cross_entropy}}};
const EnumNames<heads::TemporalAggregation> kAggregation{
    {{"absolute_difference", heads::TemporalAggregation::absolute_difference},
     {"hadamard_product", heads::TemporalAggregation::hadamard_product}}};

// Reads typed values out of a table and remembers which keys were consumed.
class Reader {
 public:
  Reader(const toml::table& t, std::string path) : t_(t), path_(std::move(path)) {}

  template <typename V>
  void get(const char* key, V& out) {
    seen_.insert(key);
    const toml::node* n = t_.get(key);
    if (n == nullptr) return;
    if constexpr (std::is_same_v<V, bool>) {
      auto v = n->value_exact<bool>();
      need(v.has_value(), key, "boolean");
      out = *v;
    } else if constexpr (std::is_integral_v<V>) {
      auto v = n->value_exact<std::int64_t>();
      need(v.has_value(), key, "integer");
      if constexpr (std::is_unsigned_v<V>) need(*v >= 0, key, "non-negative integer");
      out = static_cast<V>(*v);
    } else if constexpr (std::is_floating_point_v<V>) {
      auto v = n->value<double>();  // integers are accepted for floats
      need(v.has_value() && !n->is_string(), key, "number");
      out = *v;
    } else {
      auto v = n->value_exact<std::string>();
      need(v.has_value(), key, "string");
      out = *v;
    }
  }

  template <typename E>
  void get_enum(const char* key, const EnumNames<E>& names, E& out) {
    std::string s = names.name(out);
    get(key, s);
    out = names.parse(qualified(key), s);
  }

  Reader sub(const char* key) {
    seen_.insert(key);
    const toml::node* n = t_.get(key);
    if (n == nullptr) return Reader(empty_, qualified(key));
    check(n->is_table(), ErrorKind::config, qualified(key) + " must be a table");
    return Reader(*n->as_table(), qualified(key));
  }

  void finish() const {
    for (const auto& [k, _] : t_)
      check(seen_.count(std::string(k.str())) != 0, ErrorKind::config, "unknown key " + qualified(std::string(k.str())));
  }

 private:
  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  void need(bool ok, const char* key, const char* type) const {
    check(ok, ErrorKind::config, qualified(key) + " must be a " + type);
  }

  const toml::table& t_;
  std::string path_;
  std::set<std::string> seen_;
  static inline const toml::table empty_{};
};

}  // namespace

TrainConfig TrainConfig::parse(std::string_view text) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "invalid TOML at line " << e.source().begin.line << ": " << e.description();
    throw Error(ErrorKind::config, msg.str());
  }
  TrainConfig c;
  Reader r(root, "");
  r.get("max_steps", c.max_steps);
  r.get("batch_size", c.batch_size);
  r.get("base_lr", c.base_lr);
  r.get("lr_gamma", c.lr_gamma);
  r.get("momentum", c.momentum);
  r.get("weight_decay", c.weight_decay);
  r.get("seed", c.seed);
  r.get_enum("supervision", kSupervision, c.supervision);
  r.get("eval_every", c.eval_every);
  r.get("threads", c.threads);

  Reader d = r.sub("data");
  d.get("root", c.data_root);
  d.get("train_split", c.train_split);
  d.get("eval_split", c.eval_split);
  d.finish();

  Reader p = r.sub("pairing");
  p.get("self_contrast_p", c.pairing.self_contrast_p);
  p.get_enum("jitter_strength", kJitter, c.pairing.jitter_strength);
  p.get("brightness", c.pairing.jitter.brightness);
  p.get("contrast", c.pairing.jitter.contrast);
  p.get("saturation", c.pairing.jitter.saturation);
  p.get("hue_shift", c.pairing.jitter.hue_shift);
  p.finish();

  Reader l = r.sub("loss");
  l.get_enum("binary_change_loss", kChangeLoss, c.loss.binary_change_loss);
  l.get_enum("semantic_loss", kSemLoss, c.loss.semantic_loss);
  l.get("ignore_value", c.loss.ignore_value);
  l.finish();

  Reader m = r.sub("model");
  m.get("num_classes", c.model.num_classes);
  m.get("backbone", c.model.backbone.name);
  m.get("in_channels", c.model.backbone.in_channels);
  m.get("width", c.model.backbone.width);
  m.finish();

  Reader h = r.sub("head");
  h.get("n_conv_layers", c.model.head.n_conv_layers);
  h.get("conv_channels", c.model.head.conv_channels);
  h.get("use_tdn", c.model.head.use_tdn);
  h.get_enum("aggregation", kAggregation, c.model.head.aggregation);
  h.finish();

  Reader a = r.sub("augment");
  a.get("flips", c.augment.flips);
  a.get("rot90", c.augment.rot90);
  a.get("scale_jitter", c.augment.scale_jitter);
  a.get("scale_min", c.augment.scale_min);
  a.get("scale_max", c.augment.scale_max);
  a.get("crop_size", c.augment.crop_size);
  a.get("color_jitter", c.augment.color_jitter);
  a.get("brightness", c.augment.jitter.brightness);
  a.get("contrast", c.augment.jitter.contrast);
  a.get("saturation", c.augment.jitter.saturation);
  a.get("hue_shift", c.augment.jitter.hue_shift);
  a.finish();

  r.finish();
  c.validate();
  return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  check(in.good(), ErrorKind::config, "cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string TrainConfig::to_toml() const {
  // Doubles print with full precision so parse(to_toml()) is exact.
  auto num = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    std::string s = buf;
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
  };
  auto str = [](const std::string& s) {
    std::ostringstream o;
    o << toml::value<std::string>(s);
    return o.str();
  };
  auto b = [](bool v) { return v ? "true" : "false"; };
  std::ostringstream o;
  o << "max_steps = " << max_steps << "\n"
    << "batch_size = " << batch_size << "\n"
    << "base_lr = " << num(base_lr) << "\n"
    << "lr_gamma = " << num(lr_gamma) << "\n"
    << "momentum = " << num(momentum) << "\n"
    << "weight_decay = " << num(weight_decay) << "\n"
    << "seed = " << seed << "\n"
    << "supervision = \"" << kSupervision.name(supervision) << "\"\n"
    << "eval_every = " << eval_every << "\n"
    << "threads = " << threads << "\n"
    << "\n[data]\n"
    << "root = " << str(data_root) << "\n"
    << "train_split = " << str(train_split) << "\n"
    << "eval_split = " << str(eval_split) << "\n"
    << "\n[pairing]\n"
    << "self_contrast_p = " << num(pairing.self_contrast_p) << "\n"
    << "jitter_strength = \"" << kJitter.name(pairing.jitter_strength) << "\"\n"
    << "brightness = " << num(pairing.jitter.brightness) << "\n"
    << "contrast = " << num(pairing.jitter.contrast) << "\n"
    << "saturation = " << num(pairing.jitter.saturation) << "\n"
    << "hue_shift = " << num(pairing.jitter.hue_shift) << "\n"
    << "\n[loss]\n"
    << "binary_change_loss = \"" << kChangeLoss.name(loss.binary_change_loss) << "\"\n"
    << "semantic_loss = \"" << kSemLoss.name(loss.semantic_loss) << "\"\n"
    << "ignore_value = " << loss.ignore_value << "\n"
    << "\n[model]\n"
    << "num_classes = " << model.num_classes << "\n"
    << "backbone = " << str(model.backbone.name) << "\n"
    << "in_channels = " << model.backbone.in_channels << "\n"
    << "width = " << model.backbone.width << "\n"
    << "\n[head]\n"
    << "n_conv_layers = " << model.head.n_conv_layers << "\n"
    << "conv_channels = " << model.head.conv_channels << "\n"
    << "use_tdn = " << b(model.head.use_tdn) << "\n"
    << "aggregation = \"" << kAggregation.name(model.head.aggregation) << "\"\n"
    << "\n[augment]\n"
    << "flips = " << b(augment.flips) << "\n"
    << "rot90 = " << b(augment.rot90) << "\n"
    << "scale_jitter = " << b(augment.scale_jitter) << "\n"
    << "scale_min = " << num(augment.scale_min) << "\n"
    << "scale_max = " << num(augment.scale_max) << "\n"
    << "crop_size = " << augment.crop_size << "\n"
    << "color_jitter = " << b(augment.color_jitter) << "\n"
    << "brightness = " << num(augment.jitter.brightness) << "\n"
    << "contrast = " << num(augment.jitter.contrast) << "\n"
    << "saturation = " << num(augment.jitter.saturation) << "\n"
    << "hue_shift = " << num(augment.jitter.hue_shift) << "\n";
  return o.str();
}

std::string TrainConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_toml()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace starcd::harness
