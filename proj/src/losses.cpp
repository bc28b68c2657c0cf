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

#include "fairkd/losses.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace fairkd {
namespace {

// Derivative guard: d/dc of sin(acos(c)) diverges at |c| = 1.
constexpr double kCosClamp = 1.0 - 1e-7;

struct TargetValue {
  double value;       // cos(theta + a) - b, or the fallback
  double derivative;  // with respect to cos(theta)
};

TargetValue target_cosine(double c, TargetMargin margin) {
  const double a = margin.angular;
  if (a > 0.0 && c < -std::cos(a)) {
    return {c - a * std::sin(a) - margin.additive, 1.0};
  }
  const double sin_theta = std::sqrt(std::max(0.0, 1.0 - c * c));
  const double value = c * std::cos(a) - sin_theta * std::sin(a) - margin.additive;
  const double cc = std::clamp(c, -kCosClamp, kCosClamp);
  const double derivative = std::cos(a) + std::sin(a) * cc / std::sqrt(1.0 - cc * cc);
  return {value, derivative};
}

void check_label(Index y, Index classes) {
  if (y < 0 || y >= classes) {
    throw Error(ErrorCode::kIndexOutOfRange,
                "label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
  }
}

void check_dims(const Matrix& embeddings, const ClassPrototypes& prototypes) {
  if (embeddings.rows() != prototypes.cols()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "embedding dimension " + std::to_string(embeddings.rows()) +
                    " vs prototype dimension " + std::to_string(prototypes.cols()));
  }
}

// Projects g onto the tangent space of the sphere at u and divides by the norm.
Vector sphere_backprop(const Vector& u, double norm, const Vector& g) {
  return (g - u * u.dot(g)) / norm;
}

}  // namespace

std::string_view MarginKindName(MarginKind kind) {
  switch (kind) {
    case MarginKind::kArcFace: return "arcface";
    case MarginKind::kElasticArcFace: return "elastic_arcface";
    case MarginKind::kAdaFace: return "adaface";
  }
  return "unknown";
}

MarginKind ParseMarginKind(std::string_view name) {
  if (name == "arcface") return MarginKind::kArcFace;
  if (name == "elastic_arcface") return MarginKind::kElasticArcFace;
  if (name == "adaface") return MarginKind::kAdaFace;
  throw Error(ErrorCode::kConfigError, "unknown margin kind '" + std::string(name) + "'");
}

MarginConfig MarginConfig::ArcFace(double s, double m) {
  return {MarginKind::kArcFace, s, m, 0.0, 0.333, 0.01};
}

MarginConfig MarginConfig::ElasticArcFace(double s, double m, double std) {
  return {MarginKind::kElasticArcFace, s, m, std, 0.333, 0.01};
}

MarginConfig MarginConfig::AdaFace(double s, double m) {
  return {MarginKind::kAdaFace, s, m, 0.0, 0.333, 0.01};
}

void MarginConfig::validate() const {
  if (!(s > 0.0)) throw Error(ErrorCode::kInvalidArgument, "margin scale s must be positive");
  if (!(m >= 0.0 && m < std::numbers::pi / 2)) {
    throw Error(ErrorCode::kInvalidArgument, "margin m must lie in [0, pi/2)");
  }
  if (!(std >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "margin std must be non-negative");
  if (!(h > 0.0)) throw Error(ErrorCode::kInvalidArgument, "adaface h must be positive");
  if (!(ema_momentum > 0.0 && ema_momentum <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "adaface ema_momentum must lie in (0, 1]");
  }
}

void LossConfig::validate() const {
  margin.validate();
  if (!(lambda >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "lambda must be non-negative");
}

NormStats NormStats::FromNorms(std::span<const double> norms) {
  if (norms.empty()) throw Error(ErrorCode::kEmptyInput, "NormStats::FromNorms on empty batch");
  NormStats stats;
  stats.initialized = true;
  double sum = 0.0;
  for (double n : norms) sum += std::clamp(n, kMinNorm, kMaxNorm);
  stats.mean_norm = sum / static_cast<double>(norms.size());
  if (norms.size() > 1) {
    double sq = 0.0;
    for (double n : norms) {
      const double d = std::clamp(n, kMinNorm, kMaxNorm) - stats.mean_norm;
      sq += d * d;
    }
    stats.std_norm = std::sqrt(sq / static_cast<double>(norms.size() - 1));
  }
  if (!(stats.std_norm > 0.0)) stats.std_norm = 1.0;
  return stats;
}

double NormStats::norm_hat(double norm, double h) const {
  if (!initialized) throw Error(ErrorCode::kUninitializedStats, "AdaFace norm statistics not initialized");
  const double clipped = std::clamp(norm, kMinNorm, kMaxNorm);
  return std::clamp((clipped - mean_norm) / (std_norm / h), -1.0, 1.0);
}

void NormStats::update(std::span<const double> norms, double momentum) {
  if (!initialized) throw Error(ErrorCode::kUninitializedStats, "AdaFace norm statistics not initialized");
  if (norms.empty()) return;
  const NormStats batch = FromNorms(norms);
  mean_norm = (1.0 - momentum) * mean_norm + momentum * batch.mean_norm;
  if (norms.size() > 1) std_norm = (1.0 - momentum) * std_norm + momentum * batch.std_norm;
}

TargetMargin arcface_margin(const MarginConfig& cfg) { return {cfg.m, 0.0}; }

double sample_elastic_margin(const MarginConfig& cfg, std::mt19937_64& rng) {
  if (cfg.std == 0.0) return cfg.m;
  std::normal_distribution<double> draw(cfg.m, cfg.std);
  return draw(rng);
}

TargetMargin adaface_margin(const MarginConfig& cfg, double norm_hat) {
  return {-cfg.m * norm_hat, cfg.m * norm_hat + cfg.m};
}

Vector margin_logits(const Vector& embedding, const ClassPrototypes& prototypes, Index y, double s,
                     TargetMargin margin) {
  check_dims(embedding, prototypes);
  check_label(y, prototypes.rows());
  const Vector u = l2_normalize(embedding);
  const Vector cosines = (normalize_rows(prototypes) * u).cwiseMax(-1.0).cwiseMin(1.0);
  Vector logits = s * cosines;
  logits(y) = s * target_cosine(cosines(y), margin).value;
  return logits;
}

Vector margin_logits_arcface(const Vector& embedding, const ClassPrototypes& prototypes, Index y,
                             const MarginConfig& cfg) {
  return margin_logits(embedding, prototypes, y, cfg.s, arcface_margin(cfg));
}

Vector margin_logits_elastic(const Vector& embedding, const ClassPrototypes& prototypes, Index y,
                             const MarginConfig& cfg, std::mt19937_64& rng) {
  check_dims(embedding, prototypes);
  check_label(y, prototypes.rows());
  return margin_logits(embedding, prototypes, y, cfg.s, {sample_elastic_margin(cfg, rng), 0.0});
}

Vector margin_logits_adaface(const Vector& embedding, const ClassPrototypes& prototypes, Index y,
                             const MarginConfig& cfg, NormStats& stats) {
  const double norm = embedding.norm();
  const double nh = stats.norm_hat(norm, cfg.h);
  Vector logits = margin_logits(embedding, prototypes, y, cfg.s, adaface_margin(cfg, nh));
  const double norms[] = {norm};
  stats.update(norms, cfg.ema_momentum);
  return logits;
}

double cross_entropy(const Vector& logits, Index y) {
  check_label(y, logits.size());
  const double top = logits.maxCoeff();
  const double lse = top + std::log((logits.array() - top).exp().sum());
  return std::max(0.0, lse - logits(y));
}

double kd_embedding_loss(const Vector& teacher, const Vector& student, KdReduction reduction) {
  if (teacher.size() != student.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "kd_embedding_loss: teacher and student dimensions differ");
  }
  const double sum = (teacher - student).squaredNorm();
  return reduction == KdReduction::kMean ? sum / static_cast<double>(teacher.size()) : sum;
}

Vector kd_embedding_gradient(const Vector& teacher, const Vector& student, KdReduction reduction) {
  if (teacher.size() != student.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "kd_embedding_gradient: teacher and student dimensions differ");
  }
  const double scale = reduction == KdReduction::kMean ? 2.0 / static_cast<double>(teacher.size()) : 2.0;
  return scale * (student - teacher);
}

double total_loss(double cls_loss, double kd_loss, double lambda) {
  if (!(kd_loss >= 0.0) || !(lambda >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "total_loss: kd_loss and lambda must be non-negative");
  }
  return cls_loss + lambda * kd_loss;
}

BatchHeadResult batch_margin_loss(const Matrix& embeddings, const ClassPrototypes& prototypes,
                                  std::span<const Index> labels, double s,
                                  std::span<const TargetMargin> margins) {
  check_dims(embeddings, prototypes);
  const Index batch = embeddings.cols();
  if (static_cast<Index>(labels.size()) != batch || static_cast<Index>(margins.size()) != batch) {
    throw Error(ErrorCode::kShapeMismatch, "batch_margin_loss: labels/margins do not match batch size");
  }
  const Index classes = prototypes.rows();
  for (Index y : labels) check_label(y, classes);

  const Eigen::RowVectorXd emb_norms = embeddings.colwise().norm();
  const Vector proto_norms = prototypes.rowwise().norm();
  if ((emb_norms.array() <= kZeroNormEpsilon).any() || (proto_norms.array() <= kZeroNormEpsilon).any()) {
    throw Error(ErrorCode::kZeroVector, "batch_margin_loss: zero embedding or prototype");
  }
  const Matrix units = embeddings.array().rowwise() / emb_norms.array();
  const Matrix protos = prototypes.array().colwise() / proto_norms.array();
  const Matrix cosines = (protos * units).cwiseMax(-1.0).cwiseMin(1.0);

  Matrix logits = s * cosines;
  std::vector<double> target_derivative(batch);
  for (Index b = 0; b < batch; ++b) {
    const TargetValue t = target_cosine(cosines(labels[b], b), margins[b]);
    logits(labels[b], b) = s * t.value;
    target_derivative[b] = t.derivative;
  }

  BatchHeadResult out;
  out.per_sample_loss.resize(batch);
  Matrix d_logits(classes, batch);
  double total = 0.0;
  for (Index b = 0; b < batch; ++b) {
    const double top = logits.col(b).maxCoeff();
    const Vector e = (logits.col(b).array() - top).exp();
    const double z = e.sum();
    const double loss = std::max(0.0, top + std::log(z) - logits(labels[b], b));
    out.per_sample_loss[b] = loss;
    total += loss;
    d_logits.col(b) = e / z;
    d_logits(labels[b], b) -= 1.0;
  }
  const double inv_batch = 1.0 / static_cast<double>(batch);
  out.mean_loss = total * inv_batch;

  Matrix d_cos = (s * inv_batch) * d_logits;
  for (Index b = 0; b < batch; ++b) d_cos(labels[b], b) *= target_derivative[b];

  const Matrix d_units = protos.transpose() * d_cos;   // D x B
  const Matrix d_protos = d_cos * units.transpose();   // C x D
  out.d_embeddings.resize(embeddings.rows(), batch);
  for (Index b = 0; b < batch; ++b) {
    out.d_embeddings.col(b) = sphere_backprop(units.col(b), emb_norms(b), d_units.col(b));
  }
  out.d_prototypes.resize(classes, prototypes.cols());
  for (Index c = 0; c < classes; ++c) {
    out.d_prototypes.row(c) =
        sphere_backprop(protos.row(c).transpose(), proto_norms(c), d_protos.row(c).transpose()).transpose();
  }
  return out;
}

HeadGradients margin_loss_gradients(const Vector& embedding, const ClassPrototypes& prototypes,
                                    Index y, double s, TargetMargin margin) {
  const Index labels[] = {y};
  const TargetMargin margins[] = {margin};
  BatchHeadResult batch = batch_margin_loss(embedding, prototypes, labels, s, margins);
  HeadGradients out;
  out.loss = batch.mean_loss;
  out.logits = margin_logits(embedding, prototypes, y, s, margin);
  out.d_embedding = batch.d_embeddings.col(0);
  out.d_prototypes = std::move(batch.d_prototypes);
  return out;
}

KdBatchResult batch_kd_loss(const Matrix& teacher, const Matrix& student, bool on_normalized,
                            KdReduction reduction) {
  if (teacher.rows() != student.rows() || teacher.cols() != student.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "batch_kd_loss: teacher/student shapes differ");
  }
  const Index batch = student.cols();
  KdBatchResult out;
  out.per_sample_loss.resize(batch);
  out.d_student.resize(student.rows(), batch);
  const double inv_batch = batch > 0 ? 1.0 / static_cast<double>(batch) : 0.0;
  double total = 0.0;
  for (Index b = 0; b < batch; ++b) {
    if (on_normalized) {
      const double norm = student.col(b).norm();
      const Vector u = l2_normalize(student.col(b));
      const Vector t = l2_normalize(teacher.col(b));
      const double loss = kd_embedding_loss(t, u, reduction);
      out.per_sample_loss[b] = loss;
      total += loss;
      out.d_student.col(b) = inv_batch * sphere_backprop(u, norm, kd_embedding_gradient(t, u, reduction));
    } else {
      const double loss = kd_embedding_loss(teacher.col(b), student.col(b), reduction);
      out.per_sample_loss[b] = loss;
      total += loss;
      out.d_student.col(b) = inv_batch * kd_embedding_gradient(teacher.col(b), student.col(b), reduction);
    }
  }
  out.mean_loss = total * inv_batch;
  return out;
}

HeadGradients distillation_gradients(const Vector& student, const Vector& teacher,
                                     const ClassPrototypes& prototypes, Index y,
                                     TargetMargin margin, const LossConfig& cfg) {
  HeadGradients head = margin_loss_gradients(student, prototypes, y, cfg.margin.s, margin);
  const KdBatchResult kd = batch_kd_loss(teacher, student, cfg.kd_on_normalized, cfg.kd_reduction);
  head.loss = total_loss(head.loss, kd.mean_loss, cfg.lambda);
  head.d_embedding += cfg.lambda * kd.d_student.col(0);
  return head;
}

}  // namespace fairkd
