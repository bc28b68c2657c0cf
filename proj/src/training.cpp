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

#include "fairkd/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace fairkd {
namespace {

struct Velocity {
  std::vector<DenseLayer> layers;
  Matrix prototypes;
};

ClassPrototypes init_prototypes(Index classes, Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> draw(0.0, 1.0);
  ClassPrototypes w(classes, dim);
  for (Index j = 0; j < dim; ++j) {
    for (Index i = 0; i < classes; ++i) w(i, j) = draw(rng);
  }
  return w;
}

std::string serialize_rng(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

void check_finite(double value, const char* what, int epoch, Index batch_start) {
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::kDivergenceDetected, std::string(what) + " is not finite at epoch " +
                                                    std::to_string(epoch) + ", batch starting at sample " +
                                                    std::to_string(batch_start));
  }
}

TrainedModel run_training(const Encoder* teacher, const EncoderSpec& spec, const TrainingSet& data,
                          const LossConfig& loss, const TrainConfig& train) {
  train.validate();
  loss.validate();
  spec.validate();
  if (data.size() == 0) throw Error(ErrorCode::kEmptyManifest, "training set is empty");
  if (data.features.rows() != spec.input_dim) {
    throw Error(ErrorCode::kDimensionMismatch, "feature dimension " + std::to_string(data.features.rows()) +
                                                   " does not match encoder input " +
                                                   std::to_string(spec.input_dim));
  }
  if (static_cast<Index>(data.labels.size()) != data.size()) {
    throw Error(ErrorCode::kShapeMismatch, "label count does not match feature count");
  }
  for (Index y : data.labels) {
    if (y < 0 || y >= data.num_classes) throw Error(ErrorCode::kIndexOutOfRange, "label outside class range");
  }
  std::string teacher_digest;
  if (teacher != nullptr) {
    if (teacher->embedding_dim() != spec.embedding_dim) {
      throw Error(ErrorCode::kDimensionMismatch, "teacher embedding dimension " +
                                                     std::to_string(teacher->embedding_dim()) +
                                                     " differs from student " + std::to_string(spec.embedding_dim));
    }
    if (teacher->spec().input_dim != spec.input_dim) {
      throw Error(ErrorCode::kDimensionMismatch, "teacher and student input dimensions differ");
    }
    teacher_digest = teacher->digest();
  }

  TrainedModel model;
  model.encoder = Encoder(spec);
  std::mt19937_64 rng(train.seed);
  model.prototypes = init_prototypes(data.num_classes, spec.embedding_dim, rng);

  Velocity velocity;
  for (const DenseLayer& layer : model.encoder.layers()) {
    velocity.layers.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()),
                               Vector::Zero(layer.bias.size())});
  }
  velocity.prototypes = Matrix::Zero(model.prototypes.rows(), model.prototypes.cols());

  const MarginConfig& margin = loss.margin;
  const Index n = data.size();
  const Index batch_size = train.batch_size;
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});

  for (int epoch = 0; epoch < train.epochs; ++epoch) {
    const double lr = lr_at_epoch(epoch, train);
    std::shuffle(order.begin(), order.end(), rng);
    double sum_total = 0.0, sum_cls = 0.0, sum_kd = 0.0;

    for (Index start = 0; start < n; start += batch_size) {
      const Index b = std::min(batch_size, n - start);
      Matrix inputs(data.features.rows(), b);
      std::vector<Index> labels(b);
      for (Index i = 0; i < b; ++i) {
        const Index idx = order[start + i];
        inputs.col(i) = hflip_augment(data.features.col(idx), train.hflip_prob, rng);
        labels[i] = data.labels[idx];
      }

      ForwardCache cache;
      const Matrix embeddings = model.encoder.forward(inputs, &cache);

      std::vector<TargetMargin> margins(b);
      std::vector<double> norms;
      switch (margin.kind) {
        case MarginKind::kArcFace:
          std::fill(margins.begin(), margins.end(), arcface_margin(margin));
          break;
        case MarginKind::kElasticArcFace:
          for (auto& m : margins) m = {sample_elastic_margin(margin, rng), 0.0};
          break;
        case MarginKind::kAdaFace: {
          norms.resize(b);
          for (Index i = 0; i < b; ++i) norms[i] = embeddings.col(i).norm();
          if (!model.norm_stats.initialized) model.norm_stats = NormStats::FromNorms(norms);
          for (Index i = 0; i < b; ++i) {
            margins[i] = adaface_margin(margin, model.norm_stats.norm_hat(norms[i], margin.h));
          }
          break;
        }
      }

      BatchHeadResult head = batch_margin_loss(embeddings, model.prototypes, labels, margin.s, margins);
      if (margin.kind == MarginKind::kAdaFace) model.norm_stats.update(norms, margin.ema_momentum);
      check_finite(head.mean_loss, "classification loss", epoch, start);

      Matrix d_embeddings = std::move(head.d_embeddings);
      double kd_mean = 0.0;
      if (teacher != nullptr) {
        const Matrix teacher_embeddings = teacher->forward(inputs);
        const KdBatchResult kd =
            batch_kd_loss(teacher_embeddings, embeddings, loss.kd_on_normalized, loss.kd_reduction);
        kd_mean = kd.mean_loss;
        check_finite(kd_mean, "distillation loss", epoch, start);
        d_embeddings += loss.lambda * kd.d_student;
      }
      const double batch_total = teacher != nullptr ? total_loss(head.mean_loss, kd_mean, loss.lambda)
                                                    : head.mean_loss;
      check_finite(batch_total, "total loss", epoch, start);

      std::vector<DenseLayer> grads = model.encoder.backward(cache, d_embeddings);
      std::vector<DenseLayer>& layers = model.encoder.mutable_layers();
      for (size_t l = 0; l < layers.size(); ++l) {
        if (train.weight_decay > 0.0) grads[l].weight += train.weight_decay * layers[l].weight;
        sgd_step(layers[l].weight, grads[l].weight, lr, train.momentum, velocity.layers[l].weight);
        sgd_step(layers[l].bias, grads[l].bias, lr, train.momentum, velocity.layers[l].bias);
      }
      if (train.weight_decay > 0.0) head.d_prototypes += train.weight_decay * model.prototypes;
      sgd_step(model.prototypes, head.d_prototypes, lr, train.momentum, velocity.prototypes);

      const double weight = static_cast<double>(b);
      sum_total += weight * batch_total;
      sum_cls += weight * head.mean_loss;
      sum_kd += weight * kd_mean;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    model.trace.push_back({epoch, lr, sum_total * inv_n, sum_cls * inv_n, sum_kd * inv_n});
  }

  if (teacher != nullptr && teacher->digest() != teacher_digest) {
    throw Error(ErrorCode::kFrozenViolation, "teacher parameters changed during distillation");
  }
  model.rng_state = serialize_rng(rng);
  return model;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw Error(ErrorCode::kInvalidArgument, "epochs must be non-negative");
  if (batch_size <= 0) throw Error(ErrorCode::kInvalidArgument, "batch_size must be positive");
  if (!(base_lr > 0.0)) throw Error(ErrorCode::kInvalidArgument, "base_lr must be positive");
  if (!(lr_factor > 1.0)) throw Error(ErrorCode::kInvalidArgument, "lr_factor must exceed 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw Error(ErrorCode::kInvalidArgument, "momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "weight_decay must be non-negative");
  if (!(hflip_prob >= 0.0 && hflip_prob <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "hflip_prob must lie in [0, 1]");
  }
  for (size_t i = 0; i < lr_milestones.size(); ++i) {
    if (i > 0 && lr_milestones[i] <= lr_milestones[i - 1]) {
      throw Error(ErrorCode::kInvalidArgument, "lr_milestones must be strictly increasing");
    }
    if (lr_milestones[i] < 0 || (epochs > 0 && lr_milestones[i] >= epochs)) {
      throw Error(ErrorCode::kInvalidArgument, "lr_milestones must lie in [0, epochs)");
    }
  }
}

double lr_at_epoch(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch >= cfg.epochs) {
    throw Error(ErrorCode::kEpochOutOfRange,
                "epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(cfg.epochs) + ")");
  }
  int passed = 0;
  for (int milestone : cfg.lr_milestones) passed += milestone <= epoch ? 1 : 0;
  double lr = cfg.base_lr;
  for (int i = 0; i < passed; ++i) lr /= cfg.lr_factor;
  return lr;
}

Vector hflip_augment(const Vector& feature, double p, std::mt19937_64& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "flip probability must lie in [0, 1]");
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const bool flip = coin(rng) < p;
  return flip ? Vector(feature.reverse()) : feature;
}

TrainedModel train_from_scratch(const EncoderSpec& spec, const TrainingSet& data, const LossConfig& loss,
                                const TrainConfig& train) {
  return run_training(nullptr, spec, data, loss, train);
}

TrainedModel distill(const Encoder& teacher, const EncoderSpec& student_spec, const TrainingSet& data,
                     const LossConfig& loss, const TrainConfig& train) {
  return run_training(&teacher, student_spec, data, loss, train);
}

}  // namespace fairkd
