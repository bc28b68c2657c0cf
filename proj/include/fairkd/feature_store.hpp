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
#include <unordered_map>
#include <vector>

#include "fairkd/core.hpp"
#include "fairkd/sampling.hpp"
#include "fairkd/training.hpp"

namespace fairkd {

/// Toy-face feature vectors keyed by sample id. Manifest payload_ref values
/// have the form "<store file name>#<sample id>".
///
/// Text format: "#fairkd-features 1", "#dim=<F>", then one
/// "<sample_id>\t<v0>,<v1>,..." line per sample in insertion order.
class FeatureStore {
 public:
  FeatureStore() = default;
  explicit FeatureStore(Index dim) : dim_(dim) {}

  Index dim() const { return dim_; }
  size_t size() const { return ids_.size(); }

  void add(std::string sample_id, Vector feature);
  bool contains(std::string_view sample_id) const;
  /// Throws MissingSample.
  const Vector& at(std::string_view sample_id) const;
  const std::vector<std::string>& ids() const { return ids_; }

  /// Adds every sample of `other`; ids must not collide.
  void merge(const FeatureStore& other);

  /// Extra "#key=value" lines go after the dim line.
  std::string serialize(std::span<const std::pair<std::string, std::string>> header = {}) const;
  static FeatureStore parse(std::string_view text);

 private:
  Index dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<Vector> features_;
  std::unordered_map<std::string, size_t> index_;
};

/// Features in manifest order, labels by identity first appearance.
TrainingSet make_training_set(const DatasetManifest& manifest, const FeatureStore& store);

}  // namespace fairkd
