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

#include "fairkd/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "fairkd/io.hpp"

namespace fairkd {
namespace {

constexpr double kProbabilityTolerance = 1e-6;
constexpr double kRoundingSlack = 1e-9;

struct Pool {
  std::vector<const ManifestEntry*> entries;
  Index num_groups = 0;
};

// Concatenates manifests, rejecting identities or samples that appear in more than one.
void append_to_pool(Pool& pool, std::span<const DatasetManifest> manifests,
                    std::unordered_map<std::string, size_t>& identity_owner,
                    std::unordered_set<std::string>& sample_ids, size_t& manifest_counter) {
  for (const DatasetManifest& manifest : manifests) {
    manifest.validate();
    if (pool.num_groups == 0) pool.num_groups = manifest.num_groups;
    if (manifest.num_groups != pool.num_groups) {
      throw Error(ErrorCode::kInvalidArgument, "manifests disagree on group count: " +
                                                   std::to_string(manifest.num_groups) + " vs " +
                                                   std::to_string(pool.num_groups));
    }
    const size_t id = manifest_counter++;
    for (const ManifestEntry& e : manifest.entries) {
      auto [it, inserted] = identity_owner.emplace(e.identity_id, id);
      if (!inserted && it->second != id) {
        throw Error(ErrorCode::kDuplicateIdentityAcrossSources,
                    "identity '" + e.identity_id + "' appears in more than one input manifest");
      }
      if (!sample_ids.insert(e.sample_id).second) {
        throw Error(ErrorCode::kDuplicateSample, "sample '" + e.sample_id + "' appears twice");
      }
      pool.entries.push_back(&e);
    }
  }
}

std::vector<IdentityScore> score_pool(const std::vector<const ManifestEntry*>& entries) {
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<Vector>> labels;
  std::unordered_map<std::string, Source> sources;
  for (const ManifestEntry* e : entries) {
    auto [it, inserted] = labels.try_emplace(e->identity_id);
    if (inserted) {
      order.push_back(e->identity_id);
      sources[e->identity_id] = e->source;
    }
    it->second.push_back(e->soft_labels);
  }
  std::vector<IdentityScore> scores;
  scores.reserve(order.size());
  for (const std::string& id : order) {
    IdentityScore s = score_identity(identity_soft_label(labels.at(id)));
    s.identity_id = id;
    s.source = sources.at(id);
    scores.push_back(std::move(s));
  }
  return scores;
}

bool ranks_before(const IdentityScore& a, const IdentityScore& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.identity_id < b.identity_id;
}

// Top `quota` identities of `group` among `scores`; records a shortfall when the cell is short.
void select_cell(const std::vector<IdentityScore>& scores, Index group, Source source, Index quota,
                 std::unordered_set<std::string>& kept, std::vector<Shortfall>& shortfalls) {
  std::vector<const IdentityScore*> candidates;
  for (const IdentityScore& s : scores) {
    if (s.group == group) candidates.push_back(&s);
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const IdentityScore* a, const IdentityScore* b) { return ranks_before(*a, *b); });
  const Index available = static_cast<Index>(candidates.size());
  if (available < quota) shortfalls.push_back({group, source, quota, available});
  for (Index i = 0; i < std::min(quota, available); ++i) kept.insert(candidates[i]->identity_id);
}

DatasetManifest filter(const std::vector<const ManifestEntry*>& entries, const std::unordered_set<std::string>& kept,
                       Index num_groups, std::string name) {
  DatasetManifest out;
  out.name = std::move(name);
  out.num_groups = num_groups;
  for (const ManifestEntry* e : entries) {
    if (kept.contains(e->identity_id)) out.entries.push_back(*e);
  }
  return out;
}

}  // namespace

std::string_view SourceName(Source source) { return source == Source::kReal ? "real" : "synthetic"; }

Source ParseSource(std::string_view name) {
  if (name == "real") return Source::kReal;
  if (name == "synthetic") return Source::kSynthetic;
  throw Error(ErrorCode::kInvalidArgument, "unknown source '" + std::string(name) + "'");
}

void DatasetManifest::validate() const {
  if (num_groups < 1) throw Error(ErrorCode::kInvalidArgument, "manifest '" + name + "' has no groups");
  std::unordered_set<std::string> samples;
  std::unordered_map<std::string, Source> identity_source;
  for (const ManifestEntry& e : entries) {
    if (!samples.insert(e.sample_id).second) {
      throw Error(ErrorCode::kDuplicateSample, "sample '" + e.sample_id + "' repeated in manifest '" + name + "'");
    }
    if (e.soft_labels.size() != num_groups) {
      throw Error(ErrorCode::kInvalidArgument, "sample '" + e.sample_id + "' has " +
                                                   std::to_string(e.soft_labels.size()) + " soft labels, expected " +
                                                   std::to_string(num_groups));
    }
    if ((e.soft_labels.array() < 0.0).any() || std::abs(e.soft_labels.sum() - 1.0) > kProbabilityTolerance) {
      throw Error(ErrorCode::kInvalidArgument, "sample '" + e.sample_id + "' soft labels are not a distribution");
    }
    auto [it, inserted] = identity_source.emplace(e.identity_id, e.source);
    if (!inserted && it->second != e.source) {
      throw Error(ErrorCode::kInvalidArgument, "identity '" + e.identity_id + "' mixes real and synthetic samples");
    }
  }
}

std::vector<std::string> DatasetManifest::identities() const {
  std::vector<std::string> order;
  std::unordered_set<std::string> seen;
  for (const ManifestEntry& e : entries) {
    if (seen.insert(e.identity_id).second) order.push_back(e.identity_id);
  }
  return order;
}

std::string DatasetManifest::serialize() const {
  std::string out = "#fairkd-manifest 1\n#name=" + name + "\n#groups=" + std::to_string(num_groups) + "\n";
  for (const auto& [key, value] : header) out += "#" + key + "=" + value + "\n";
  for (const ManifestEntry& e : entries) {
    out += e.sample_id + "\t" + e.identity_id + "\t" + std::string(SourceName(e.source)) + "\t";
    for (Index g = 0; g < e.soft_labels.size(); ++g) {
      if (g > 0) out += ',';
      out += format_double(e.soft_labels(g));
    }
    out += "\t" + e.payload_ref + "\n";
  }
  return out;
}

DatasetManifest DatasetManifest::parse(std::string_view text) {
  const std::vector<std::string_view> lines = split(text, '\n');
  if (lines.empty() || trim(lines[0]) != "#fairkd-manifest 1") {
    throw Error(ErrorCode::kFormatVersionMismatch, "not a fairkd manifest (version 1)");
  }
  DatasetManifest m;
  for (size_t n = 1; n < lines.size(); ++n) {
    const std::string_view line = lines[n];
    if (trim(line).empty()) continue;
    if (line.starts_with('#')) {
      const size_t eq = line.find('=');
      if (eq == std::string_view::npos) continue;
      const std::string key(line.substr(1, eq - 1));
      const std::string value(line.substr(eq + 1));
      if (key == "name") {
        m.name = value;
      } else if (key == "groups") {
        m.num_groups = parse_int(value);
      } else {
        m.header.emplace_back(key, value);
      }
      continue;
    }
    const std::vector<std::string_view> f = split(line, '\t');
    if (f.size() != 5) {
      throw Error(ErrorCode::kIoError, "manifest line " + std::to_string(n + 1) + " has " +
                                           std::to_string(f.size()) + " fields, expected 5");
    }
    const std::vector<std::string_view> probs = split(f[3], ',');
    Vector labels(static_cast<Index>(probs.size()));
    for (size_t g = 0; g < probs.size(); ++g) labels(static_cast<Index>(g)) = parse_double(probs[g]);
    m.entries.push_back({std::string(f[0]), std::string(f[1]), ParseSource(f[2]), std::move(labels), std::string(f[4])});
  }
  m.validate();
  return m;
}

Vector identity_soft_label(std::span<const Vector> image_labels) {
  if (image_labels.empty()) throw Error(ErrorCode::kEmptyIdentity, "identity has no images");
  Vector mean = Vector::Zero(image_labels.front().size());
  for (const Vector& v : image_labels) {
    if (v.size() != mean.size()) throw Error(ErrorCode::kDimensionMismatch, "soft label lengths differ");
    mean += v;
  }
  return mean / static_cast<double>(image_labels.size());
}

IdentityScore score_identity(const Vector& mean_labels) {
  if (mean_labels.size() == 0) throw Error(ErrorCode::kEmptyInput, "empty soft label vector");
  IdentityScore out;
  Index best = 0;
  for (Index g = 1; g < mean_labels.size(); ++g) {
    if (mean_labels(g) > mean_labels(best)) best = g;
  }
  out.group = best;
  out.score = mean_labels(best);
  return out;
}

std::vector<IdentityScore> score_identities(const DatasetManifest& manifest) {
  std::vector<const ManifestEntry*> entries;
  for (const ManifestEntry& e : manifest.entries) entries.push_back(&e);
  return score_pool(entries);
}

std::vector<Index> group_quotas(Index total_identities, Index num_groups) {
  if (num_groups < 1) throw Error(ErrorCode::kInvalidArgument, "need at least one group");
  std::vector<Index> quotas(num_groups, total_identities / num_groups);
  for (Index g = 0; g < total_identities % num_groups; ++g) ++quotas[g];
  return quotas;
}

std::vector<Index> apportion_real(std::span<const Index> quotas, double real_fraction) {
  if (!(real_fraction > 0.0 && real_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "real_fraction must lie in (0, 1)");
  }
  const Index total = std::accumulate(quotas.begin(), quotas.end(), Index{0});
  const double exact_real = static_cast<double>(total) * real_fraction;
  const double exact_synth = static_cast<double>(total) * (1.0 - real_fraction);
  Index real_total = static_cast<Index>(std::floor(exact_real + kRoundingSlack));
  const Index synth_floor = static_cast<Index>(std::floor(exact_synth + kRoundingSlack));
  if (real_total + synth_floor < total) {
    const double real_rem = exact_real - static_cast<double>(real_total);
    const double synth_rem = exact_synth - static_cast<double>(synth_floor);
    if (real_rem + kRoundingSlack >= synth_rem) ++real_total;
  }
  real_total = std::min(real_total, total);

  const size_t groups = quotas.size();
  std::vector<Index> real(groups);
  std::vector<double> remainder(groups);
  Index assigned = 0;
  for (size_t g = 0; g < groups; ++g) {
    const double exact = static_cast<double>(quotas[g]) * real_fraction;
    real[g] = std::min(quotas[g], static_cast<Index>(std::floor(exact + kRoundingSlack)));
    remainder[g] = exact - static_cast<double>(real[g]);
    assigned += real[g];
  }
  std::vector<size_t> order(groups);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return remainder[a] > remainder[b] + kRoundingSlack;
  });
  while (assigned < real_total) {
    bool progressed = false;
    for (size_t g : order) {
      if (assigned == real_total) break;
      if (real[g] < quotas[g]) {
        ++real[g];
        ++assigned;
        progressed = true;
      }
    }
    if (!progressed) break;
  }
  return real;
}

MergeResult balanced_merge(std::span<const DatasetManifest> manifests, Index total_identities) {
  Pool pool;
  std::unordered_map<std::string, size_t> owner;
  std::unordered_set<std::string> samples;
  size_t counter = 0;
  append_to_pool(pool, manifests, owner, samples, counter);
  if (pool.num_groups == 0) throw Error(ErrorCode::kEmptyInput, "balanced_merge needs at least one manifest");
  if (total_identities < pool.num_groups) {
    throw Error(ErrorCode::kInvalidArgument, "total_identities must be at least the group count");
  }
  const std::vector<IdentityScore> scores = score_pool(pool.entries);
  const std::vector<Index> quotas = group_quotas(total_identities, pool.num_groups);

  MergeResult result;
  std::unordered_set<std::string> kept;
  for (Index g = 0; g < pool.num_groups; ++g) {
    select_cell(scores, g, Source::kReal, quotas[g], kept, result.shortfalls);
  }
  result.manifest = filter(pool.entries, kept, pool.num_groups, "merged");
  result.manifest.header = stats_header(manifest_stats(result.manifest), result.shortfalls, false);
  return result;
}

MergeResult mix_merge(std::span<const DatasetManifest> real_manifests,
                      std::span<const DatasetManifest> synthetic_manifests, double real_fraction,
                      Index total_identities) {
  if (real_manifests.empty() || synthetic_manifests.empty()) {
    throw Error(ErrorCode::kEmptyInput, "mix_merge needs both real and synthetic manifests");
  }
  Pool real_pool;
  Pool synth_pool;
  std::unordered_map<std::string, size_t> owner;
  std::unordered_set<std::string> samples;
  size_t counter = 0;
  append_to_pool(real_pool, real_manifests, owner, samples, counter);
  append_to_pool(synth_pool, synthetic_manifests, owner, samples, counter);
  if (real_pool.num_groups != synth_pool.num_groups) {
    throw Error(ErrorCode::kInvalidArgument, "real and synthetic manifests disagree on group count");
  }
  const Index groups = real_pool.num_groups;
  if (total_identities < groups) {
    throw Error(ErrorCode::kInvalidArgument, "total_identities must be at least the group count");
  }

  // The pool decides the source recorded in the output.
  std::vector<ManifestEntry> relabeled;
  relabeled.reserve(real_pool.entries.size() + synth_pool.entries.size());
  for (const ManifestEntry* e : real_pool.entries) {
    relabeled.push_back(*e);
    relabeled.back().source = Source::kReal;
  }
  for (const ManifestEntry* e : synth_pool.entries) {
    relabeled.push_back(*e);
    relabeled.back().source = Source::kSynthetic;
  }
  std::vector<const ManifestEntry*> real_entries, synth_entries, all_entries;
  for (const ManifestEntry& e : relabeled) {
    (e.source == Source::kReal ? real_entries : synth_entries).push_back(&e);
    all_entries.push_back(&e);
  }

  const std::vector<IdentityScore> real_scores = score_pool(real_entries);
  const std::vector<IdentityScore> synth_scores = score_pool(synth_entries);
  const std::vector<Index> quotas = group_quotas(total_identities, groups);
  const std::vector<Index> real_quota = apportion_real(quotas, real_fraction);

  MergeResult result;
  std::unordered_set<std::string> kept;
  for (Index g = 0; g < groups; ++g) {
    select_cell(real_scores, g, Source::kReal, real_quota[g], kept, result.shortfalls);
    select_cell(synth_scores, g, Source::kSynthetic, quotas[g] - real_quota[g], kept, result.shortfalls);
  }
  result.manifest = filter(all_entries, kept, groups, "mix");
  result.manifest.header = stats_header(manifest_stats(result.manifest), result.shortfalls);
  return result;
}

CellStats ManifestStats::group_total(Index group) const {
  return {real[group].identities + synthetic[group].identities, real[group].images + synthetic[group].images};
}

CellStats ManifestStats::total() const {
  CellStats out;
  for (size_t g = 0; g < real.size(); ++g) {
    const CellStats t = group_total(static_cast<Index>(g));
    out.identities += t.identities;
    out.images += t.images;
  }
  return out;
}

double ManifestStats::real_identity_share() const {
  const Index total_ids = total().identities;
  if (total_ids == 0) return 0.0;
  Index real_ids = 0;
  for (const CellStats& c : real) real_ids += c.identities;
  return static_cast<double>(real_ids) / static_cast<double>(total_ids);
}

ManifestStats manifest_stats(const DatasetManifest& manifest) {
  ManifestStats stats;
  stats.real.assign(manifest.num_groups, {});
  stats.synthetic.assign(manifest.num_groups, {});
  std::vector<const ManifestEntry*> entries;
  for (const ManifestEntry& e : manifest.entries) entries.push_back(&e);
  std::unordered_map<std::string, Index> group_of;
  for (const IdentityScore& s : score_pool(entries)) {
    group_of[s.identity_id] = s.group;
    (s.source == Source::kReal ? stats.real : stats.synthetic)[s.group].identities += 1;
  }
  for (const ManifestEntry& e : manifest.entries) {
    (e.source == Source::kReal ? stats.real : stats.synthetic)[group_of.at(e.identity_id)].images += 1;
  }
  return stats;
}

std::vector<std::pair<std::string, std::string>> stats_header(const ManifestStats& stats,
                                                              std::span<const Shortfall> shortfalls,
                                                              bool per_source) {
  std::vector<std::pair<std::string, std::string>> header;
  const CellStats total = stats.total();
  header.emplace_back("stats.identities", std::to_string(total.identities));
  header.emplace_back("stats.images", std::to_string(total.images));
  header.emplace_back("stats.real_identity_share", format_double(stats.real_identity_share()));
  for (size_t g = 0; g < stats.real.size(); ++g) {
    const std::string prefix = "stats.g" + std::to_string(g) + ".";
    header.emplace_back(prefix + "real", std::to_string(stats.real[g].identities) + " ids/" +
                                             std::to_string(stats.real[g].images) + " images");
    header.emplace_back(prefix + "synthetic", std::to_string(stats.synthetic[g].identities) + " ids/" +
                                                  std::to_string(stats.synthetic[g].images) + " images");
  }
  for (const Shortfall& s : shortfalls) {
    std::string key = "shortfall.g" + std::to_string(s.group);
    if (per_source) key += "." + std::string(SourceName(s.source));
    header.emplace_back(key,
                        std::to_string(s.requested - s.available) + " of " + std::to_string(s.requested));
  }
  return header;
}

}  // namespace fairkd
