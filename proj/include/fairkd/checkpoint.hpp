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

#include <filesystem>
#include <optional>
#include <string>

#include "fairkd/training.hpp"

namespace fairkd {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

/// Everything needed to resume or evaluate a run.
///
/// On-disk layout (little-endian):
///   8 bytes   magic "FAIRKDCK"
///   u32       format version
///   u64       header length, followed by a UTF-8 JSON header holding the
///             encoder spec, tensor shapes, NormStats, RNG state, config
///             digest and free-form metadata
///   f64[]     tensors in header order: per layer weight (column-major) then
///             bias, then the prototype matrix (column-major)
///   32 bytes  SHA-256 over everything before it
struct Checkpoint {
  Encoder encoder;
  ClassPrototypes prototypes;
  NormStats norm_stats;
  std::string rng_state;
  std::string config_digest;
  std::string role;  // "teacher" or "student"
  std::string metadata_json = "{}";

  bool operator==(const Checkpoint& other) const;
};

Checkpoint make_checkpoint(const TrainedModel& model, std::string config_digest, std::string role);

/// Atomic: writes to a sibling temp file and renames over `path`.
void checkpoint_save(const Checkpoint& checkpoint, const std::filesystem::path& path);

/// Throws IoError on unreadable or truncated files, FormatVersionMismatch on
/// a foreign magic/version or digest failure, DimensionMismatch when
/// `expected_embedding_dim` is given and differs.
Checkpoint checkpoint_load(const std::filesystem::path& path,
                           std::optional<Index> expected_embedding_dim = std::nullopt);

}  // namespace fairkd
