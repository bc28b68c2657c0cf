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

// Analytic-vs-finite-difference checks for every loss head. The losses are
// re-evaluated through the forward API only (margin_logits, cross_entropy,
// kd_embedding_loss, total_loss); the gradients come from the backward API.

#include <algorithm>
#include <random>
#include <vector>

#include "fairkd/losses.hpp"
#include "oracles.hpp"

namespace fairkd::testing {

struct GradientErrors {
  double arcface = 0.0;
  double elastic = 0.0;
  double adaface = 0.0;
  double kd = 0.0;
  double total = 0.0;

  double worst() const { return std::max({arcface, elastic, adaface, kd, total}); }
};

inline constexpr Index kCheckDim = 8;
inline constexpr Index kCheckClasses = 5;
inline constexpr double kCheckStep = 1e-5;

inline Vector random_vector(std::mt19937_64& rng, Index n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

/// Worst relative error over the embedding and prototype gradients of one head.
inline double head_error(const Vector& z, const Matrix& protos, Index y, double s, TargetMargin margin) {
  const HeadGradients g = margin_loss_gradients(z, protos, y, s, margin);
  const auto loss_of_embedding = [&](const Vector& x) {
    return cross_entropy(margin_logits(x, protos, y, s, margin), y);
  };
  const auto loss_of_prototypes = [&](const Vector& p) {
    return cross_entropy(margin_logits(z, unflatten(p, protos.rows(), protos.cols()), y, s, margin), y);
  };
  const double e1 = relative_error(g.d_embedding, finite_difference(loss_of_embedding, z, kCheckStep));
  const double e2 =
      relative_error(flatten(g.d_prototypes), finite_difference(loss_of_prototypes, flatten(protos), kCheckStep));
  return std::max(e1, e2);
}

inline GradientErrors gradient_errors(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> label(0, kCheckClasses - 1);
  std::uniform_real_distribution<double> norm_scale(0.5, 20.0);
  GradientErrors out;

  const Vector z = random_vector(rng, kCheckDim, norm_scale(rng) / 3.0);
  const Matrix protos = unflatten(random_vector(rng, kCheckDim * kCheckClasses), kCheckClasses, kCheckDim);
  const Index y = label(rng);

  const MarginConfig arc = MarginConfig::ArcFace();
  out.arcface = head_error(z, protos, y, arc.s, arcface_margin(arc));

  const MarginConfig elastic = MarginConfig::ElasticArcFace();
  const double sampled = sample_elastic_margin(elastic, rng);
  out.elastic = head_error(z, protos, y, elastic.s, TargetMargin{sampled, 0.0});

  const MarginConfig ada = MarginConfig::AdaFace();
  std::vector<double> batch_norms;
  for (int i = 0; i < 16; ++i) batch_norms.push_back(norm_scale(rng));
  const NormStats stats = NormStats::FromNorms(batch_norms);
  out.adaface = head_error(z, protos, y, ada.s, adaface_margin(ada, stats.norm_hat(z.norm(), ada.h)));

  const Vector teacher = random_vector(rng, kCheckDim, 2.0);
  double kd = 0.0;
  for (KdReduction r : {KdReduction::kMean, KdReduction::kSum}) {
    const auto f = [&](const Vector& x) { return kd_embedding_loss(teacher, x, r); };
    kd = std::max(kd, relative_error(kd_embedding_gradient(teacher, z, r), finite_difference(f, z, kCheckStep)));
  }
  out.kd = kd;

  double total = 0.0;
  for (bool normalized : {false, true}) {
    LossConfig cfg;
    cfg.margin = ada;
    cfg.lambda = normalized ? 100.0 : 0.7;
    cfg.kd_on_normalized = normalized;
    const TargetMargin margin = adaface_margin(ada, 0.3);
    const HeadGradients g = distillation_gradients(z, teacher, protos, y, margin, cfg);
    const auto f = [&](const Vector& x) {
      const double cls = cross_entropy(margin_logits(x, protos, y, cfg.margin.s, margin), y);
      const double kd_loss = normalized ? kd_embedding_loss(teacher / teacher.norm(), x / x.norm())
                                        : kd_embedding_loss(teacher, x);
      return total_loss(cls, kd_loss, cfg.lambda);
    };
    total = std::max(total, relative_error(g.d_embedding, finite_difference(f, z, kCheckStep)));
  }
  out.total = total;
  return out;
}

}  // namespace fairkd::testing
