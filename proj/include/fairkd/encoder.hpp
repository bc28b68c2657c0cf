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
#include <string>
#include <string_view>
#include <vector>

#include "fairkd/core.hpp"

namespace fairkd {

enum class Activation { kRelu, kTanh };

std::string_view ActivationName(Activation activation);
Activation ParseActivation(std::string_view name);

/// Fully-connected encoder shape: input -> hidden... -> embedding (linear head).
struct EncoderSpec {
  Index input_dim = 32;
  std::vector<Index> hidden_widths{64};
  Index embedding_dim = 16;
  Activation activation = Activation::kRelu;
  std::uint64_t init_seed = 0;

  Index parameter_count() const;
  void validate() const;

  bool operator==(const EncoderSpec&) const = default;
};

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

/// Activations kept from a forward pass for backpropagation.
struct ForwardCache {
  std::vector<Matrix> inputs;          // input to each layer
  std::vector<Matrix> pre_activations;  // output of each hidden layer before the nonlinearity
};

class Encoder {
 public:
  Encoder() = default;
  /// He-initialized from spec.init_seed.
  explicit Encoder(EncoderSpec spec);
  Encoder(EncoderSpec spec, std::vector<DenseLayer> layers);

  const EncoderSpec& spec() const { return spec_; }
  Index embedding_dim() const { return spec_.embedding_dim; }

  /// Columns of `inputs` are samples; returns D x B embeddings.
  Matrix forward(const Matrix& inputs) const;
  Matrix forward(const Matrix& inputs, ForwardCache* cache) const;
  Vector embed(const Vector& input) const;

  /// Parameter gradients given dLoss/dOutput, one DenseLayer per layer.
  std::vector<DenseLayer> backward(const ForwardCache& cache, const Matrix& d_output) const;

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers() { return layers_; }

  /// SHA-256 over the architecture and every parameter byte.
  std::string digest() const;

  bool operator==(const Encoder& other) const;

 private:
  EncoderSpec spec_;
  std::vector<DenseLayer> layers_;
};

}  // namespace fairkd
