// Copyright 2026 The fairkd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fairkd/config.hpp"

#include <cstdlib>

#include "json.hpp"

#include "fairkd/digest.hpp"
#include "fairkd/io.hpp"

namespace fairkd {
namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& key, const std::string& what) {
  throw Error(ErrorCode::kConfigError, "'" + key + "': " + what);
}

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

// Overlays `user` onto `base`; every user key must already exist in base.
void overlay(json& base, const json& user, const std::string& prefix) {
  if (!user.is_object()) config_error(prefix.empty() ? "<root>" : prefix, "expected an object");
  for (const auto& [key, value] : user.items()) {
    const std::string path = join(prefix, key);
    if (!base.contains(key)) config_error(path, "unknown config key");
    if (base[key].is_object()) {
      overlay(base[key], value, path);
    } else {
      base[key] = value;
    }
  }
}

void apply_override(json& root, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) config_error(assignment, "override must look like key.path=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json* node = &root;
  for (std::string_view part : split(path, '.')) {
    const std::string key(part);
    if (!node->is_object() || !node->contains(key)) config_error(path, "unknown config key");
    node = &(*node)[key];
  }
  if (node->is_object()) config_error(path, "cannot override a whole section");
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  *node = std::move(value);
}

class Reader {
 public:
  explicit Reader(const json& root) : root_(root) {}

  const json& at(const std::string& path) const {
    const json* node = &root_;
    for (std::string_view part : split(path, '.')) node = &node->at(std::string(part));
    return *node;
  }

  double real(const std::string& path) const {
    const json& v = at(path);
    if (!v.is_number()) config_error(path, "expected a number");
    return v.get<double>();
  }
  long long integer(const std::string& path) const {
    const json& v = at(path);
    if (!v.is_number_integer()) config_error(path, "expected an integer");
    return v.get<long long>();
  }
  std::uint64_t unsigned_integer(const std::string& path) const {
    const json& v = at(path);
    if (!v.is_number_unsigned()) config_error(path, "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }
  bool boolean(const std::string& path) const {
    const json& v = at(path);
    if (!v.is_boolean()) config_error(path, "expected true or false");
    return v.get<bool>();
  }
  std::string text(const std::string& path) const {
    const json& v = at(path);
    if (!v.is_string()) config_error(path, "expected a string");
    return v.get<std::string>();
  }
  std::vector<double> reals(const std::string& path) const {
    const json& v = at(path);
    if (!v.is_array()) config_error(path, "expected an array of numbers");
    std::vector<double> out;
    for (const json& e : v) {
      if (!e.is_number()) config_error(path, "expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }
  std::vector<long long> integers(const std::string& path) const {
    const json& v = at(path);
    if (!v.is_array()) config_error(path, "expected an array of integers");
    std::vector<long long> out;
    for (const json& e : v) {
      if (!e.is_number_integer()) config_error(path, "expected an array of integers");
      out.push_back(e.get<long long>());
    }
    return out;
  }

  template <typename Enum, typename ParseFn>
  Enum named(const std::string& path, ParseFn parse) const {
    const std::string name = text(path);
    try {
      return parse(name);
    } catch (const Error&) {
      config_error(path, "unknown value '" + name + "'");
    }
  }

 private:
  const json& root_;
};

json encoder_json(const EncoderSpec& spec) {
  return {{"hidden_widths", spec.hidden_widths},
          {"embedding_dim", spec.embedding_dim},
          {"activation", std::string(ActivationName(spec.activation))}};
}

EncoderSpec encoder_from(const Reader& r, const std::string& section) {
  EncoderSpec spec;
  spec.hidden_widths.clear();
  for (long long w : r.integers(section + ".hidden_widths")) spec.hidden_widths.push_back(w);
  spec.embedding_dim = r.integer(section + ".embedding_dim");
  spec.activation = r.named<Activation>(section + ".activation", ParseActivation);
  return spec;
}

json to_json_value(const RunConfig& c) {
  const UniverseConfig& u = c.universe;
  const MarginConfig& m = c.loss.margin;
  json j;
  j["seed"] = c.seed;
  j["universe"] = {{"n_groups", u.n_groups},
                   {"n_identities", u.n_identities},
                   {"images_per_identity", u.images_per_identity},
                   {"eval_identities", u.eval_identities},
                   {"eval_images_per_identity", u.eval_images_per_identity},
                   {"latent_dim", u.latent_dim},
                   {"feature_dim", u.feature_dim},
                   {"noise_scales", u.noise_scales},
                   {"label_concentration", u.label_concentration},
                   {"image_label_concentration", u.image_label_concentration},
                   {"group_separation", u.group_separation},
                   {"group_map_spread", u.group_map_spread},
                   {"synthetic_mean_shift", u.synthetic_mean_shift},
                   {"synthetic_inflation", u.synthetic_inflation},
                   {"synthetic_collapse", u.synthetic_collapse},
                   {"synthetic_image_jitter", u.synthetic_image_jitter},
                   {"synthetic_map_shift", u.synthetic_map_shift},
                   {"synthetic_noise_factor", u.synthetic_noise_factor}};
  j["train"] = {{"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"base_lr", c.train.base_lr},
                {"lr_milestones", c.train.lr_milestones},
                {"lr_factor", c.train.lr_factor},
                {"momentum", c.train.momentum},
                {"weight_decay", c.train.weight_decay},
                {"hflip_prob", c.train.hflip_prob}};
  j["loss"] = {{"margin",
                {{"kind", std::string(MarginKindName(m.kind))},
                 {"s", m.s},
                 {"m", m.m},
                 {"std", m.std},
                 {"h", m.h},
                 {"ema_momentum", m.ema_momentum}}},
               {"lambda", c.loss.lambda},
               {"kd_on_normalized", c.loss.kd_on_normalized},
               {"kd_reduction", c.loss.kd_reduction == KdReduction::kMean ? "mean" : "sum"}};
  j["teacher"] = encoder_json(c.teacher);
  j["student"] = encoder_json(c.student);
  j["eval"] = {{"k_folds", c.eval.k_folds}, {"pairs_per_group", c.eval.pairs_per_group}};
  j["paths"] = {{"out_dir", c.paths.out_dir}};
  return j;
}

RunConfig from_json_value(const json& j) {
  const Reader r(j);
  RunConfig c;
  c.seed = r.unsigned_integer("seed");

  UniverseConfig& u = c.universe;
  u.n_groups = r.integer("universe.n_groups");
  u.n_identities = r.integer("universe.n_identities");
  u.images_per_identity = r.integer("universe.images_per_identity");
  u.eval_identities = r.integer("universe.eval_identities");
  u.eval_images_per_identity = r.integer("universe.eval_images_per_identity");
  u.latent_dim = r.integer("universe.latent_dim");
  u.feature_dim = r.integer("universe.feature_dim");
  u.noise_scales = r.reals("universe.noise_scales");
  u.label_concentration = r.real("universe.label_concentration");
  u.image_label_concentration = r.real("universe.image_label_concentration");
  u.group_separation = r.real("universe.group_separation");
  u.group_map_spread = r.real("universe.group_map_spread");
  u.synthetic_mean_shift = r.real("universe.synthetic_mean_shift");
  u.synthetic_inflation = r.real("universe.synthetic_inflation");
  u.synthetic_collapse = r.real("universe.synthetic_collapse");
  u.synthetic_image_jitter = r.real("universe.synthetic_image_jitter");
  u.synthetic_map_shift = r.real("universe.synthetic_map_shift");
  u.synthetic_noise_factor = r.real("universe.synthetic_noise_factor");

  c.train.epochs = static_cast<int>(r.integer("train.epochs"));
  c.train.batch_size = static_cast<int>(r.integer("train.batch_size"));
  c.train.base_lr = r.real("train.base_lr");
  c.train.lr_milestones.clear();
  for (long long e : r.integers("train.lr_milestones")) c.train.lr_milestones.push_back(static_cast<int>(e));
  c.train.lr_factor = r.real("train.lr_factor");
  c.train.momentum = r.real("train.momentum");
  c.train.weight_decay = r.real("train.weight_decay");
  c.train.hflip_prob = r.real("train.hflip_prob");

  MarginConfig& m = c.loss.margin;
  m.kind = r.named<MarginKind>("loss.margin.kind", ParseMarginKind);
  m.s = r.real("loss.margin.s");
  m.m = r.real("loss.margin.m");
  m.std = r.real("loss.margin.std");
  m.h = r.real("loss.margin.h");
  m.ema_momentum = r.real("loss.margin.ema_momentum");
  c.loss.lambda = r.real("loss.lambda");
  c.loss.kd_on_normalized = r.boolean("loss.kd_on_normalized");
  const std::string reduction = r.text("loss.kd_reduction");
  if (reduction != "mean" && reduction != "sum") config_error("loss.kd_reduction", "expected 'mean' or 'sum'");
  c.loss.kd_reduction = reduction == "mean" ? KdReduction::kMean : KdReduction::kSum;

  c.teacher = encoder_from(r, "teacher");
  c.student = encoder_from(r, "student");
  c.eval.k_folds = static_cast<int>(r.integer("eval.k_folds"));
  c.eval.pairs_per_group = r.integer("eval.pairs_per_group");
  c.paths.out_dir = r.text("paths.out_dir");
  return c;
}

template <typename F>
void checked(const char* section, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfigError) throw;
    throw Error(ErrorCode::kConfigError, std::string("'") + section + "': " + e.what());
  }
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

RunConfig RunConfig::Defaults() {
  RunConfig c;
  c.train.batch_size = 64;
  c.loss.margin = MarginConfig::AdaFace(16.0, 0.4);
  c.loss.margin.std = 0.05;
  c.loss.lambda = 100.0;
  c.loss.kd_on_normalized = true;
  c.teacher.hidden_widths = {128, 128};
  c.teacher.embedding_dim = 16;
  c.student.hidden_widths = {32};
  c.student.embedding_dim = 16;
  return c;
}

RunConfig RunConfig::Parse(std::string_view json_text, std::span<const std::string> overrides) {
  json merged = to_json_value(Defaults());
  if (!trim(json_text).empty()) {
    json user = json::parse(json_text, nullptr, false);
    if (user.is_discarded()) throw Error(ErrorCode::kConfigError, "config is not valid JSON");
    overlay(merged, user, "");
  }
  for (const std::string& o : overrides) apply_override(merged, o);
  RunConfig c = from_json_value(merged);
  c.validate();
  return c;
}

std::string RunConfig::to_json() const { return to_json_value(*this).dump(); }

std::string RunConfig::digest() const { return sha256_hex(to_json()); }

void RunConfig::validate() const {
  checked("universe", [&] { resolved_universe(*this).validate(); });
  checked("train", [&] { train.validate(); });
  checked("loss", [&] { loss.validate(); });
  checked("teacher", [&] { resolved_encoder(*this, true).validate(); });
  checked("student", [&] { resolved_encoder(*this, false).validate(); });
  if (teacher.embedding_dim != student.embedding_dim) {
    config_error("student.embedding_dim", "must equal teacher.embedding_dim");
  }
  if (eval.k_folds < 2) config_error("eval.k_folds", "must be at least 2");
  if (eval.pairs_per_group < 2 || eval.pairs_per_group % 2 != 0) {
    config_error("eval.pairs_per_group", "must be a positive even number");
  }
  if (paths.out_dir.empty()) config_error("paths.out_dir", "must not be empty");
}

std::uint64_t seed_for(std::uint64_t seed, SeedStream stream) {
  return splitmix64(splitmix64(seed) ^ (static_cast<std::uint64_t>(stream) + 1));
}

UniverseConfig resolved_universe(const RunConfig& cfg) {
  UniverseConfig u = cfg.universe;
  u.seed = seed_for(cfg.seed, SeedStream::kUniverse);
  return u;
}

TrainConfig resolved_train(const RunConfig& cfg) {
  TrainConfig t = cfg.train;
  t.seed = seed_for(cfg.seed, SeedStream::kTrain);
  return t;
}

EncoderSpec resolved_encoder(const RunConfig& cfg, bool teacher) {
  EncoderSpec spec = teacher ? cfg.teacher : cfg.student;
  spec.input_dim = cfg.universe.feature_dim;
  spec.init_seed = seed_for(cfg.seed, teacher ? SeedStream::kTeacherInit : SeedStream::kStudentInit);
  return spec;
}

std::optional<std::filesystem::path> locate_config(const std::optional<std::string>& explicit_path) {
  const char* dir = std::getenv("FAIRKD_CONFIG_DIR");
  if (explicit_path) {
    std::filesystem::path p(*explicit_path);
    if (!std::filesystem::exists(p) && p.is_relative() && dir != nullptr && std::filesystem::exists(dir / p)) {
      return dir / p;
    }
    if (!std::filesystem::exists(p)) throw Error(ErrorCode::kConfigError, "config file '" + p.string() + "' not found");
    return p;
  }
  if (dir != nullptr) {
    const std::filesystem::path p = std::filesystem::path(dir) / "default.json";
    if (std::filesystem::exists(p)) return p;
  }
  return std::nullopt;
}

RunConfig load_run_config(const std::optional<std::string>& explicit_path, std::span<const std::string> overrides) {
  const std::optional<std::filesystem::path> path = locate_config(explicit_path);
  std::string text;
  if (path) {
    try {
      text = read_file(*path);
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfigError, "cannot read config '" + path->string() + "': " + e.what());
    }
  }
  return RunConfig::Parse(text, overrides);
}

}  // namespace fairkd
