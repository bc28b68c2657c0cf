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
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fairkd/evaluation.hpp"
#include "fairkd/feature_store.hpp"
#include "fairkd/sampling.hpp"

namespace fairkd {

/// Procedural toy universe. Every identity has a latent vector drawn from its
/// group's distribution; images are x = M_g z + noise_g * eps with a
/// group-specific mixing map M_g.
struct UniverseConfig {
  Index n_groups = 4;
  Index n_identities = 400;  // per training source
  Index images_per_identity = 8;
  Index eval_identities = 200;
  Index eval_images_per_identity = 6;
  Index latent_dim = 16;
  Index feature_dim = 32;
  std::vector<double> noise_scales{0.25, 0.3, 0.35, 0.4};
  /// Dirichlet mass on the true group (others get 1); >= 1e9 means one-hot.
  double label_concentration = 10.0;
  double image_label_concentration = 100.0;
  double group_separation = 1.0;
  double group_map_spread = 0.3;
  // Synthetic source: shifted group means, half of the latent axes inflated
  // and the other half collapsed. On the collapsed axes every synthetic image
  // also gets its own latent jitter, i.e. weak identity consistency.
  double synthetic_mean_shift = 0.5;
  double synthetic_inflation = 1.5;
  double synthetic_collapse = 0.1;
  double synthetic_image_jitter = 1.0;
  /// Synthetic images are rendered through M_g + synthetic_map_shift * C_g.
  double synthetic_map_shift = 0.0;
  double synthetic_noise_factor = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class IdentityStream { kRealTrain, kSyntheticTrain, kEval };

struct ToyIdentity {
  std::string identity_id;
  Index group = 0;
  Vector latent;
  Vector soft_labels;
  Source source = Source::kReal;
  IdentityStream stream = IdentityStream::kRealTrain;
};

struct ToySample {
  std::string sample_id;
  std::string identity_id;
  Vector feature;
  Vector soft_labels;
};

/// Fixed structure shared by all streams of one universe.
struct Universe {
  UniverseConfig cfg;
  std::vector<Vector> group_means;   // latent space
  std::vector<Matrix> mixing;        // feature_dim x latent_dim, per group
  std::vector<Matrix> synthetic_mixing;
  std::vector<Vector> synthetic_shift;
  Vector synthetic_scales;           // per latent axis
  Vector synthetic_jitter;           // per-image latent std, per axis
};

Universe make_universe(const UniverseConfig& cfg);

/// Deterministic per (seed, stream, group, index).
std::vector<ToyIdentity> gen_identities(const Universe& universe, IdentityStream stream);

/// `count` images of one identity.
std::vector<ToySample> gen_images(const Universe& universe, const ToyIdentity& identity, Index count,
                                  std::mt19937_64& rng);

struct GeneratedDataset {
  DatasetManifest manifest;
  FeatureStore features;
};

/// Manifest + features for a whole stream. payload_ref = "<store_name>#<sample_id>".
GeneratedDataset generate_dataset(const Universe& universe, IdentityStream stream, const std::string& store_name);

/// pairs_per_group / 2 positives and negatives per group, group = argmax of
/// identity soft labels. Identities listed in `excluded_identities` are never used.
PairProtocol gen_pair_protocol(const DatasetManifest& manifest, Index pairs_per_group, std::uint64_t seed,
                               std::span<const std::string> excluded_identities = {});

std::string group_name(Index group);

}  // namespace fairkd
