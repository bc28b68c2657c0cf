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

#include "fairkd/synthdata.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace fairkd {
namespace {

constexpr double kOneHotConcentration = 1e9;
constexpr size_t kEnumerationLimit = 2'000'000;

std::mt19937_64 derived_rng(std::uint64_t seed, std::uint32_t a, std::uint32_t b = 0, std::uint32_t c = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), a, b, c};
  return std::mt19937_64(seq);
}

Vector gaussian(Index n, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> draw(0.0, stddev);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = draw(rng);
  return v;
}

Matrix gaussian(Index rows, Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> draw(0.0, stddev);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = draw(rng);
  }
  return m;
}

// Stacks `top` over its row reversal, trimmed to `rows`. Mixing maps built
// this way commute with coordinate reversal, so the flip augmentation maps an
// identity's image distribution onto itself.
Matrix mirrored(const Matrix& top, Index rows) {
  Matrix out(rows, top.cols());
  for (Index i = 0; i < rows; ++i) out.row(i) = i < top.rows() ? top.row(i) : top.row(rows - 1 - i);
  return out;
}

// Dirichlet(alpha) via normalized Gamma draws; zero alphas get zero mass.
Vector dirichlet(const Vector& alpha, std::mt19937_64& rng) {
  Vector out = Vector::Zero(alpha.size());
  for (Index g = 0; g < alpha.size(); ++g) {
    if (alpha(g) > 0.0) {
      std::gamma_distribution<double> draw(alpha(g), 1.0);
      out(g) = draw(rng);
    }
  }
  const double sum = out.sum();
  if (!(sum > 0.0)) {
    Index best = 0;
    alpha.maxCoeff(&best);
    out.setZero();
    out(best) = 1.0;
    return out;
  }
  return out / sum;
}

std::uint32_t stream_tag(IdentityStream stream) {
  switch (stream) {
    case IdentityStream::kRealTrain: return 1;
    case IdentityStream::kSyntheticTrain: return 2;
    case IdentityStream::kEval: return 3;
  }
  return 0;
}

const char* stream_prefix(IdentityStream stream) {
  switch (stream) {
    case IdentityStream::kRealTrain: return "real";
    case IdentityStream::kSyntheticTrain: return "synth";
    case IdentityStream::kEval: return "eval";
  }
  return "x";
}

std::string numbered(const std::string& prefix, Index n, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%0*lld", width, static_cast<long long>(n));
  return prefix + buf;
}

// Picks `need` distinct indices from [0, total) without replacement.
std::vector<size_t> choose_without_replacement(size_t total, size_t need, std::mt19937_64& rng) {
  std::vector<size_t> out;
  if (total <= kEnumerationLimit) {
    std::vector<size_t> all(total);
    std::iota(all.begin(), all.end(), size_t{0});
    for (size_t i = 0; i < need; ++i) {
      std::uniform_int_distribution<size_t> pick(i, total - 1);
      std::swap(all[i], all[pick(rng)]);
    }
    all.resize(need);
    return all;
  }
  std::unordered_set<size_t> seen;
  std::uniform_int_distribution<size_t> pick(0, total - 1);
  while (out.size() < need) {
    const size_t v = pick(rng);
    if (seen.insert(v).second) out.push_back(v);
  }
  return out;
}

}  // namespace

std::string group_name(Index group) { return "g" + std::to_string(group); }

void UniverseConfig::validate() const {
  if (n_groups < 1) throw Error(ErrorCode::kConfigError, "universe.n_groups must be positive");
  if (latent_dim < 2 || feature_dim < 2) throw Error(ErrorCode::kConfigError, "universe dims must be >= 2");
  if (static_cast<Index>(noise_scales.size()) != n_groups) {
    throw Error(ErrorCode::kConfigError, "universe.noise_scales must have one entry per group");
  }
  for (double s : noise_scales) {
    if (!(s >= 0.0)) throw Error(ErrorCode::kConfigError, "universe.noise_scales must be non-negative");
  }
  if (!(label_concentration > 0.0)) throw Error(ErrorCode::kConfigError, "universe.label_concentration must be positive");
  if (!(image_label_concentration > 0.0)) {
    throw Error(ErrorCode::kConfigError, "universe.image_label_concentration must be positive");
  }
  if (n_identities < 0 || eval_identities < 0 || images_per_identity < 1 || eval_images_per_identity < 1) {
    throw Error(ErrorCode::kConfigError, "universe identity/image counts out of range");
  }
  if (!(synthetic_inflation > 0.0 && synthetic_collapse > 0.0 && synthetic_noise_factor >= 0.0 &&
        synthetic_image_jitter >= 0.0 && synthetic_map_shift >= 0.0)) {
    throw Error(ErrorCode::kConfigError, "universe synthetic scales must be positive");
  }
}

Universe make_universe(const UniverseConfig& cfg) {
  cfg.validate();
  Universe u;
  u.cfg = cfg;
  std::mt19937_64 rng = derived_rng(cfg.seed, 0);
  const double map_scale = 1.0 / std::sqrt(static_cast<double>(cfg.latent_dim));
  const Index half_rows = (cfg.feature_dim + 1) / 2;
  const Matrix base = gaussian(half_rows, cfg.latent_dim, map_scale, rng);
  for (Index g = 0; g < cfg.n_groups; ++g) {
    u.group_means.push_back(gaussian(cfg.latent_dim, cfg.group_separation, rng));
    const Matrix top = base + cfg.group_map_spread * gaussian(half_rows, cfg.latent_dim, map_scale, rng);
    u.mixing.push_back(mirrored(top, cfg.feature_dim));
    const Matrix render = top + cfg.synthetic_map_shift * gaussian(half_rows, cfg.latent_dim, map_scale, rng);
    u.synthetic_mixing.push_back(mirrored(render, cfg.feature_dim));
    u.synthetic_shift.push_back(gaussian(cfg.latent_dim, cfg.synthetic_mean_shift, rng));
  }
  std::vector<Index> axes(cfg.latent_dim);
  std::iota(axes.begin(), axes.end(), Index{0});
  std::shuffle(axes.begin(), axes.end(), rng);
  u.synthetic_scales = Vector::Constant(cfg.latent_dim, cfg.synthetic_inflation);
  u.synthetic_jitter = Vector::Zero(cfg.latent_dim);
  for (Index i = cfg.latent_dim / 2; i < cfg.latent_dim; ++i) {
    u.synthetic_scales(axes[i]) = cfg.synthetic_collapse;
    u.synthetic_jitter(axes[i]) = cfg.synthetic_image_jitter;
  }
  return u;
}

std::vector<ToyIdentity> gen_identities(const Universe& universe, IdentityStream stream) {
  const UniverseConfig& cfg = universe.cfg;
  const Index total = stream == IdentityStream::kEval ? cfg.eval_identities : cfg.n_identities;
  const std::vector<Index> per_group = group_quotas(total, cfg.n_groups);
  const std::string prefix = stream_prefix(stream);
  std::vector<ToyIdentity> out;
  out.reserve(total);
  for (Index g = 0; g < cfg.n_groups; ++g) {
    for (Index i = 0; i < per_group[g]; ++i) {
      std::mt19937_64 rng = derived_rng(cfg.seed, stream_tag(stream), static_cast<std::uint32_t>(g),
                                        static_cast<std::uint32_t>(i));
      ToyIdentity id;
      id.identity_id = numbered(prefix + "-" + group_name(g) + "-", i, 5);
      id.group = g;
      id.stream = stream;
      id.source = stream == IdentityStream::kSyntheticTrain ? Source::kSynthetic : Source::kReal;
      const Vector standard = gaussian(cfg.latent_dim, 1.0, rng);
      if (stream == IdentityStream::kSyntheticTrain) {
        id.latent = universe.group_means[g] + universe.synthetic_shift[g] +
                    Vector(universe.synthetic_scales.cwiseProduct(standard));
      } else {
        id.latent = universe.group_means[g] + standard;
      }
      if (stream == IdentityStream::kEval || cfg.label_concentration >= kOneHotConcentration) {
        id.soft_labels = Vector::Zero(cfg.n_groups);
        id.soft_labels(g) = 1.0;
      } else {
        Vector alpha = Vector::Ones(cfg.n_groups);
        alpha(g) = cfg.label_concentration;
        id.soft_labels = dirichlet(alpha, rng);
      }
      out.push_back(std::move(id));
    }
  }
  return out;
}

std::vector<ToySample> gen_images(const Universe& universe, const ToyIdentity& identity, Index count,
                                  std::mt19937_64& rng) {
  const UniverseConfig& cfg = universe.cfg;
  if (identity.group < 0 || identity.group >= cfg.n_groups) {
    throw Error(ErrorCode::kIndexOutOfRange, "identity group outside universe");
  }
  double noise = cfg.noise_scales[identity.group];
  if (identity.source == Source::kSynthetic) noise *= cfg.synthetic_noise_factor;
  const Matrix& mixing = identity.source == Source::kSynthetic ? universe.synthetic_mixing[identity.group]
                                                               : universe.mixing[identity.group];
  const bool jitter = identity.source == Source::kSynthetic && cfg.synthetic_image_jitter > 0.0;
  const bool one_hot = (identity.soft_labels.array() == 1.0).any();
  std::vector<ToySample> out;
  out.reserve(count);
  for (Index k = 0; k < count; ++k) {
    ToySample s;
    s.identity_id = identity.identity_id;
    s.sample_id = numbered(identity.identity_id + "-", k, 3);
    const Vector latent =
        jitter ? Vector(identity.latent + universe.synthetic_jitter.cwiseProduct(gaussian(cfg.latent_dim, 1.0, rng)))
               : identity.latent;
    s.feature = mixing * latent;
    if (noise > 0.0) s.feature += gaussian(cfg.feature_dim, noise, rng);
    s.soft_labels = one_hot ? identity.soft_labels
                            : dirichlet(cfg.image_label_concentration * identity.soft_labels, rng);
    out.push_back(std::move(s));
  }
  return out;
}

GeneratedDataset generate_dataset(const Universe& universe, IdentityStream stream, const std::string& store_name) {
  const UniverseConfig& cfg = universe.cfg;
  const Index images = stream == IdentityStream::kEval ? cfg.eval_images_per_identity : cfg.images_per_identity;
  GeneratedDataset out;
  out.features = FeatureStore(cfg.feature_dim);
  out.manifest.name = stream == IdentityStream::kRealTrain       ? "real_train"
                      : stream == IdentityStream::kSyntheticTrain ? "synthetic_train"
                                                                  : "eval";
  out.manifest.num_groups = cfg.n_groups;
  for (const ToyIdentity& id : gen_identities(universe, stream)) {
    std::mt19937_64 rng = derived_rng(cfg.seed, 16 + stream_tag(stream), static_cast<std::uint32_t>(id.group),
                                      static_cast<std::uint32_t>(std::stoul(id.identity_id.substr(id.identity_id.size() - 5))));
    for (ToySample& s : gen_images(universe, id, images, rng)) {
      out.manifest.entries.push_back({s.sample_id, id.identity_id, id.source, s.soft_labels,
                                      store_name + "#" + s.sample_id});
      out.features.add(s.sample_id, std::move(s.feature));
    }
  }
  return out;
}

PairProtocol gen_pair_protocol(const DatasetManifest& manifest, Index pairs_per_group, std::uint64_t seed,
                               std::span<const std::string> excluded_identities) {
  if (pairs_per_group < 0 || pairs_per_group % 2 != 0) {
    throw Error(ErrorCode::kOddPairCount, "pairs_per_group must be a non-negative even number, got " +
                                              std::to_string(pairs_per_group));
  }
  const std::unordered_set<std::string> excluded(excluded_identities.begin(), excluded_identities.end());
  std::unordered_map<std::string, Index> group_of;
  for (const IdentityScore& s : score_identities(manifest)) group_of.emplace(s.identity_id, s.group);

  // Per group: flat sample list with the owning identity's position.
  struct GroupSamples {
    std::vector<std::string> samples;
    std::vector<Index> owner;
    std::unordered_map<std::string, Index> identity_index;
  };
  std::vector<GroupSamples> groups(manifest.num_groups);
  for (const ManifestEntry& e : manifest.entries) {
    if (excluded.contains(e.identity_id)) continue;
    GroupSamples& gs = groups[group_of.at(e.identity_id)];
    auto [it, inserted] = gs.identity_index.emplace(e.identity_id, static_cast<Index>(gs.identity_index.size()));
    gs.samples.push_back(e.sample_id);
    gs.owner.push_back(it->second);
  }

  std::mt19937_64 rng(seed);
  const size_t half = static_cast<size_t>(pairs_per_group / 2);
  PairProtocol protocol;
  protocol.header.emplace_back("pairs_per_group", std::to_string(pairs_per_group));
  protocol.header.emplace_back("seed", std::to_string(seed));
  for (Index g = 0; g < manifest.num_groups; ++g) {
    const GroupSamples& gs = groups[g];
    GroupProtocol group{group_name(g), {}};
    if (half == 0) {
      protocol.groups.push_back(std::move(group));
      continue;
    }
    std::vector<std::pair<size_t, size_t>> positives, negatives;
    const size_t n = gs.samples.size();
    size_t negative_total = 0;
    for (size_t a = 0; a < n; ++a) {
      for (size_t b = a + 1; b < n; ++b) {
        if (gs.owner[a] == gs.owner[b]) {
          positives.emplace_back(a, b);
        } else {
          ++negative_total;
        }
      }
    }
    if (gs.identity_index.size() < 2 || positives.size() < half || negative_total < half) {
      throw Error(ErrorCode::kInsufficientIdentities,
                  "group " + group_name(g) + " has " + std::to_string(gs.identity_index.size()) + " identities, " +
                      std::to_string(positives.size()) + " positive and " + std::to_string(negative_total) +
                      " negative candidate pairs; " + std::to_string(half) + " of each needed");
    }
    for (size_t idx : choose_without_replacement(positives.size(), half, rng)) {
      group.pairs.push_back({gs.samples[positives[idx].first], gs.samples[positives[idx].second], true});
    }
    if (negative_total <= kEnumerationLimit) {
      negatives.reserve(negative_total);
      for (size_t a = 0; a < n; ++a) {
        for (size_t b = a + 1; b < n; ++b) {
          if (gs.owner[a] != gs.owner[b]) negatives.emplace_back(a, b);
        }
      }
      for (size_t idx : choose_without_replacement(negatives.size(), half, rng)) {
        group.pairs.push_back({gs.samples[negatives[idx].first], gs.samples[negatives[idx].second], false});
      }
    } else {
      std::unordered_set<size_t> seen;
      std::uniform_int_distribution<size_t> pick(0, n - 1);
      while (seen.size() < half) {
        size_t a = pick(rng), b = pick(rng);
        if (gs.owner[a] == gs.owner[b]) continue;
        if (a > b) std::swap(a, b);
        if (seen.insert(a * n + b).second) group.pairs.push_back({gs.samples[a], gs.samples[b], false});
      }
    }
    protocol.groups.push_back(std::move(group));
  }
  return protocol;
}

}  // namespace fairkd
