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

#include "fairkd/feature_store.hpp"

#include <unordered_map>

#include "fairkd/io.hpp"

namespace fairkd {

void FeatureStore::add(std::string sample_id, Vector feature) {
  if (dim_ == 0) dim_ = feature.size();
  if (feature.size() != dim_) {
    throw Error(ErrorCode::kDimensionMismatch, "feature for '" + sample_id + "' has dimension " +
                                                   std::to_string(feature.size()) + ", store holds " +
                                                   std::to_string(dim_));
  }
  if (index_.contains(sample_id)) throw Error(ErrorCode::kDuplicateSample, "sample '" + sample_id + "' already stored");
  index_.emplace(sample_id, ids_.size());
  ids_.push_back(std::move(sample_id));
  features_.push_back(std::move(feature));
}

bool FeatureStore::contains(std::string_view sample_id) const { return index_.contains(std::string(sample_id)); }

const Vector& FeatureStore::at(std::string_view sample_id) const {
  const auto it = index_.find(std::string(sample_id));
  if (it == index_.end()) throw Error(ErrorCode::kMissingSample, "no features for sample '" + std::string(sample_id) + "'");
  return features_[it->second];
}

void FeatureStore::merge(const FeatureStore& other) {
  for (size_t i = 0; i < other.ids_.size(); ++i) add(other.ids_[i], other.features_[i]);
}

std::string FeatureStore::serialize(std::span<const std::pair<std::string, std::string>> header) const {
  std::string out = "#fairkd-features 1\n#dim=" + std::to_string(dim_) + "\n";
  for (const auto& [key, value] : header) out += "#" + key + "=" + value + "\n";
  for (size_t i = 0; i < ids_.size(); ++i) {
    out += ids_[i];
    out += '\t';
    for (Index j = 0; j < features_[i].size(); ++j) {
      if (j > 0) out += ',';
      out += format_double(features_[i](j));
    }
    out += '\n';
  }
  return out;
}

FeatureStore FeatureStore::parse(std::string_view text) {
  const std::vector<std::string_view> lines = split(text, '\n');
  if (lines.empty() || trim(lines[0]) != "#fairkd-features 1") {
    throw Error(ErrorCode::kFormatVersionMismatch, "not a fairkd feature store (version 1)");
  }
  FeatureStore store;
  for (size_t n = 1; n < lines.size(); ++n) {
    const std::string_view line = lines[n];
    if (trim(line).empty()) continue;
    if (line.starts_with("#dim=")) {
      store.dim_ = parse_int(line.substr(5));
      continue;
    }
    if (line.starts_with('#')) continue;
    const std::vector<std::string_view> fields = split(line, '\t');
    if (fields.size() != 2) {
      throw Error(ErrorCode::kIoError, "feature store line " + std::to_string(n + 1) + " is malformed");
    }
    const std::vector<std::string_view> values = split(fields[1], ',');
    Vector v(static_cast<Index>(values.size()));
    for (size_t j = 0; j < values.size(); ++j) v(static_cast<Index>(j)) = parse_double(values[j]);
    store.add(std::string(fields[0]), std::move(v));
  }
  return store;
}

TrainingSet make_training_set(const DatasetManifest& manifest, const FeatureStore& store) {
  TrainingSet data;
  const std::vector<std::string> identities = manifest.identities();
  std::unordered_map<std::string, Index> label_of;
  for (size_t i = 0; i < identities.size(); ++i) label_of.emplace(identities[i], static_cast<Index>(i));
  data.num_classes = static_cast<Index>(identities.size());
  data.features.resize(store.dim(), static_cast<Index>(manifest.entries.size()));
  data.labels.reserve(manifest.entries.size());
  for (size_t i = 0; i < manifest.entries.size(); ++i) {
    const ManifestEntry& e = manifest.entries[i];
    data.features.col(static_cast<Index>(i)) = store.at(e.sample_id);
    data.labels.push_back(label_of.at(e.identity_id));
  }
  return data;
}

}  // namespace fairkd
