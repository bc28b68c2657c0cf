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
#include <string>
#include <vector>

#include "fairkd/encoder.hpp"
#include "fairkd/losses.hpp"

namespace fairkd {

struct TrainConfig {
  int epochs = 26;
  int batch_size = 256;
  double base_lr = 0.1;
  std::vector<int> lr_milestones{8, 14, 20, 25};
  double lr_factor = 10.0;
  double momentum = 0.9;
  double weight_decay = 0.0;
  double hflip_prob = 0.5;
  std::uint64_t seed = 0;

  /// Milestones strictly increasing and < epochs, factor > 1, batch_size > 0.
  void validate() const;
};

/// base_lr / factor^(number of milestones <= epoch). Throws EpochOutOfRange.
double lr_at_epoch(int epoch, const TrainConfig& cfg);

/// Coordinate reversal of the feature vector with probability p. Always
/// consumes exactly one uniform draw so the stream is independent of p.
Vector hflip_augment(const Vector& feature, double p, std::mt19937_64& rng);

/// velocity <- momentum * velocity + grad; params <- params - lr * velocity.
template <typename P, typename G, typename V>
void sgd_step(Eigen::MatrixBase<P>& params, const Eigen::MatrixBase<G>& grads, double lr, double momentum,
              Eigen::MatrixBase<V>& velocity) {
  if (params.rows() != grads.rows() || params.cols() != grads.cols() || params.rows() != velocity.rows() ||
      params.cols() != velocity.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "sgd_step: params, grads and velocity shapes differ");
  }
  velocity = momentum * velocity + grads;
  params -= lr * velocity;
}

/// Features as columns with dense class labels in [0, num_classes).
struct TrainingSet {
  Matrix features;
  std::vector<Index> labels;
  Index num_classes = 0;

  Index size() const { return features.cols(); }
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double total_loss = 0.0;
  double cls_loss = 0.0;
  double kd_loss = 0.0;  // 0 for from-scratch runs
};

struct TrainedModel {
  Encoder encoder;
  ClassPrototypes prototypes;
  NormStats norm_stats;
  std::string rng_state;
  std::vector<EpochRecord> trace;
};

/// Minibatch SGD on the margin classification loss alone (lambda is ignored).
TrainedModel train_from_scratch(const EncoderSpec& spec, const TrainingSet& data, const LossConfig& loss,
                                const TrainConfig& train);

/// Student training under cls + lambda * kd with a frozen teacher. The
/// random stream is consumed exactly as in train_from_scratch, so lambda = 0
/// reproduces it bit for bit.
TrainedModel distill(const Encoder& teacher, const EncoderSpec& student_spec, const TrainingSet& data,
                     const LossConfig& loss, const TrainConfig& train);

}  // namespace fairkd
