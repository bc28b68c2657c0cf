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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "fairkd/encoder.hpp"
#include "fairkd/losses.hpp"
#include "fairkd/synthdata.hpp"
#include "fairkd/training.hpp"

namespace fairkd {

struct EvalConfig {
  int k_folds = 10;
  Index pairs_per_group = 1000;
};

struct PathsConfig {
  std::string out_dir = "runs/default";
};

/// One run's complete configuration. Component seeds are not configured
/// individually: they are derived from `seed` (see seed_for).
///
/// JSON sections: seed, universe, train, loss{margin, lambda, kd_on_normalized,
/// kd_reduction}, teacher, student, eval, paths. Any omitted key keeps its
/// default; unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  UniverseConfig universe;
  TrainConfig train;
  LossConfig loss;
  EncoderSpec teacher;
  EncoderSpec student;
  EvalConfig eval;
  PathsConfig paths;

  /// Desk-scale defaults used when no config file is given.
  static RunConfig Defaults();

  /// Defaults, then `json_text` (may be empty), then "a.b.c=value" overrides.
  /// Throws ConfigError naming the offending key.
  static RunConfig Parse(std::string_view json_text, std::span<const std::string> overrides = {});

  /// Canonical JSON: sorted keys, no whitespace.
  std::string to_json() const;
  /// SHA-256 of to_json().
  std::string digest() const;

  /// Throws ConfigError.
  void validate() const;
};

enum class SeedStream { kUniverse, kTrain, kTeacherInit, kStudentInit, kProtocol, kFolds };

/// Deterministic, well-mixed per-stream seed.
std::uint64_t seed_for(std::uint64_t seed, SeedStream stream);

/// `cfg` with derived seeds and input dimensions filled in.
UniverseConfig resolved_universe(const RunConfig& cfg);
TrainConfig resolved_train(const RunConfig& cfg);
EncoderSpec resolved_encoder(const RunConfig& cfg, bool teacher);

/// `explicit_path` if given (resolved against FAIRKD_CONFIG_DIR when relative
/// and missing), else FAIRKD_CONFIG_DIR/default.json if present, else none.
std::optional<std::filesystem::path> locate_config(const std::optional<std::string>& explicit_path);

/// Reads the located config (if any) and applies overrides.
RunConfig load_run_config(const std::optional<std::string>& explicit_path, std::span<const std::string> overrides);

}  // namespace fairkd
