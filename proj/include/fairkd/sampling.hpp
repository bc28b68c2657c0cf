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

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fairkd/core.hpp"

namespace fairkd {

enum class Source { kReal, kSynthetic };

std::string_view SourceName(Source source);
Source ParseSource(std::string_view name);

struct ManifestEntry {
  std::string sample_id;
  std::string identity_id;
  Source source = Source::kReal;
  Vector soft_labels;  // probability vector over the G groups
  std::string payload_ref;
};

struct DatasetManifest {
  std::string name;
  Index num_groups = 0;
  std::vector<ManifestEntry> entries;
  /// Extra "key=value" header lines (stats, shortfalls, digests).
  std::vector<std::pair<std::string, std::string>> header;

  /// Soft labels are distributions over num_groups, sample ids are unique and
  /// each identity has a single source. Throws InvalidArgument otherwise.
  void validate() const;

  /// Identity ids in order of first appearance; position = dense class index.
  std::vector<std::string> identities() const;

  /// "#fairkd-manifest 1", "#name=", "#groups=", extra "#key=value" lines, then
  /// "<sample_id>\t<identity_id>\t<source>\t<p0,p1,...>\t<payload_ref>" records.
  std::string serialize() const;
  static DatasetManifest parse(std::string_view text);
};

struct IdentityScore {
  std::string identity_id;
  Index group = 0;
  double score = 0.0;
  Source source = Source::kReal;
};

/// Arithmetic mean of per-image soft labels. Throws EmptyIdentity.
Vector identity_soft_label(std::span<const Vector> image_labels);

/// Argmax group (lowest index on ties) and its mass.
IdentityScore score_identity(const Vector& mean_labels);

/// One score per identity, in first-appearance order.
std::vector<IdentityScore> score_identities(const DatasetManifest& manifest);

/// floor(total / G), plus one for the first (total mod G) groups.
std::vector<Index> group_quotas(Index total_identities, Index num_groups);

/// Real identities per group: the global real count is the largest-remainder
/// rounding of total * fraction, then spread across groups by largest
/// remainder of quota * fraction with ties going to the lower group index.
std::vector<Index> apportion_real(std::span<const Index> quotas, double real_fraction);

struct Shortfall {
  Index group = 0;
  Source source = Source::kReal;
  Index requested = 0;
  Index available = 0;
};

struct MergeResult {
  DatasetManifest manifest;
  std::vector<Shortfall> shortfalls;
};

/// Concatenates the inputs and keeps the highest-scoring identities per group
/// (ties by identity id). Kept identities keep all their images, in input order.
MergeResult balanced_merge(std::span<const DatasetManifest> manifests, Index total_identities);

/// Balanced merge with each group's quota split between real and synthetic pools.
MergeResult mix_merge(std::span<const DatasetManifest> real_manifests,
                      std::span<const DatasetManifest> synthetic_manifests, double real_fraction,
                      Index total_identities);

struct CellStats {
  Index identities = 0;
  Index images = 0;

  bool operator==(const CellStats&) const = default;
};

struct ManifestStats {
  std::vector<CellStats> real;       // per group
  std::vector<CellStats> synthetic;  // per group

  CellStats group_total(Index group) const;
  CellStats total() const;
  double real_identity_share() const;
};

ManifestStats manifest_stats(const DatasetManifest& manifest);

/// "key=value" header lines describing the stats and any shortfalls.
std::vector<std::pair<std::string, std::string>> stats_header(const ManifestStats& stats,
                                                              std::span<const Shortfall> shortfalls,
                                                              bool per_source = true);

}  // namespace fairkd
