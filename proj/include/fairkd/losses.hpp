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

#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fairkd/core.hpp"

namespace fairkd {

enum class MarginKind { kArcFace, kElasticArcFace, kAdaFace };

std::string_view MarginKindName(MarginKind kind);
MarginKind ParseMarginKind(std::string_view name);

struct MarginConfig {
  MarginKind kind = MarginKind::kAdaFace;
  double s = 60.0;
  double m = 0.4;
  double std = 0.0;             // elastic only
  double h = 0.333;             // adaface only
  double ema_momentum = 0.01;   // adaface only

  static MarginConfig ArcFace(double s = 64.0, double m = 0.5);
  static MarginConfig ElasticArcFace(double s = 64.0, double m = 0.5, double std = 0.05);
  static MarginConfig AdaFace(double s = 60.0, double m = 0.4);

  /// Throws InvalidArgument unless s > 0, 0 <= m < pi/2, std >= 0, h > 0, momentum in (0,1].
  void validate() const;
};

enum class KdReduction { kMean, kSum };

struct LossConfig {
  MarginConfig margin;
  double lambda = 1.0;
  bool kd_on_normalized = false;
  KdReduction kd_reduction = KdReduction::kMean;

  void validate() const;
};

/// Class prototypes: one row per identity class, D columns. Rows are
/// normalized on the fly whenever logits are computed.
using ClassPrototypes = Matrix;

/// Running feature-norm statistics used by AdaFace.
struct NormStats {
  double mean_norm = 0.0;
  double std_norm = 1.0;
  bool initialized = false;

  static constexpr double kMinNorm = 0.001;
  static constexpr double kMaxNorm = 100.0;

  /// Seeds the statistics from a batch of raw embedding norms.
  static NormStats FromNorms(std::span<const double> norms);

  /// clip(h * (clip(norm) - mean) / std, -1, 1).
  double norm_hat(double norm, double h) const;

  /// EMA update; a single-element batch leaves std_norm unchanged.
  void update(std::span<const double> norms, double momentum);

  bool operator==(const NormStats&) const = default;
};

/// Margin applied to the target logit: s * (cos(theta + angular) - additive).
struct TargetMargin {
  double angular = 0.0;
  double additive = 0.0;
};

TargetMargin arcface_margin(const MarginConfig& cfg);
/// Draws m_i ~ Normal(m, std); returns m exactly when std == 0 without touching rng.
double sample_elastic_margin(const MarginConfig& cfg, std::mt19937_64& rng);
TargetMargin adaface_margin(const MarginConfig& cfg, double norm_hat);

/// Scaled cosine logits with the given margin on the target class. When
/// theta + angular > pi the target falls back to s * (cos theta - angular * sin(angular) - additive).
Vector margin_logits(const Vector& embedding, const ClassPrototypes& prototypes, Index y, double s,
                     TargetMargin margin);

Vector margin_logits_arcface(const Vector& embedding, const ClassPrototypes& prototypes, Index y,
                             const MarginConfig& cfg);
Vector margin_logits_elastic(const Vector& embedding, const ClassPrototypes& prototypes, Index y,
                             const MarginConfig& cfg, std::mt19937_64& rng);
/// Computes norm_hat from the current stats, then folds this embedding's norm into them.
Vector margin_logits_adaface(const Vector& embedding, const ClassPrototypes& prototypes, Index y,
                             const MarginConfig& cfg, NormStats& stats);

/// -log softmax(logits)[y], max-subtracted.
double cross_entropy(const Vector& logits, Index y);

double kd_embedding_loss(const Vector& teacher, const Vector& student,
                         KdReduction reduction = KdReduction::kMean);
/// Gradient of kd_embedding_loss with respect to the student embedding.
Vector kd_embedding_gradient(const Vector& teacher, const Vector& student,
                             KdReduction reduction = KdReduction::kMean);

double total_loss(double cls_loss, double kd_loss, double lambda);

struct HeadGradients {
  double loss = 0.0;
  Vector logits;
  Vector d_embedding;
  Matrix d_prototypes;
};

/// cross_entropy(margin_logits(...)) and its gradient with respect to the raw
/// embedding and the raw prototype rows. The margin is held constant.
HeadGradients margin_loss_gradients(const Vector& embedding, const ClassPrototypes& prototypes,
                                    Index y, double s, TargetMargin margin);

struct BatchHeadResult {
  double mean_loss = 0.0;
  Matrix d_embeddings;   // D x B
  Matrix d_prototypes;   // C x D
  std::vector<double> per_sample_loss;
};

/// Mean margin cross-entropy over a batch whose embeddings are the columns of `embeddings`.
BatchHeadResult batch_margin_loss(const Matrix& embeddings, const ClassPrototypes& prototypes,
                                  std::span<const Index> labels, double s,
                                  std::span<const TargetMargin> margins);

struct KdBatchResult {
  double mean_loss = 0.0;
  Matrix d_student;  // D x B
  std::vector<double> per_sample_loss;
};

/// Mean kd_embedding_loss over the batch columns, optionally on normalized embeddings.
KdBatchResult batch_kd_loss(const Matrix& teacher, const Matrix& student, bool on_normalized,
                            KdReduction reduction);

/// Full per-sample objective cls + lambda * kd with gradients for the student embedding.
HeadGradients distillation_gradients(const Vector& student, const Vector& teacher,
                                     const ClassPrototypes& prototypes, Index y,
                                     TargetMargin margin, const LossConfig& cfg);

}  // namespace fairkd
