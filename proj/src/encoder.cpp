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

#include "fairkd/encoder.hpp"

#include <cmath>
#include <random>

#include "fairkd/digest.hpp"

namespace fairkd {
namespace {

Matrix activate(const Matrix& x, Activation activation) {
  switch (activation) {
    case Activation::kRelu: return x.cwiseMax(0.0);
    case Activation::kTanh: return x.array().tanh().matrix();
  }
  return x;
}

// Multiplies upstream gradient by the activation derivative at `pre`.
Matrix activation_backward(const Matrix& pre, const Matrix& upstream, Activation activation) {
  switch (activation) {
    case Activation::kRelu: return (pre.array() > 0.0).select(upstream, 0.0);
    case Activation::kTanh: return upstream.array() * (1.0 - pre.array().tanh().square());
  }
  return upstream;
}

}  // namespace

std::string_view ActivationName(Activation activation) {
  return activation == Activation::kRelu ? "relu" : "tanh";
}

Activation ParseActivation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw Error(ErrorCode::kConfigError, "unknown activation '" + std::string(name) + "'");
}

Index EncoderSpec::parameter_count() const {
  Index count = 0;
  Index in = input_dim;
  for (Index w : hidden_widths) {
    count += w * in + w;
    in = w;
  }
  return count + embedding_dim * in + embedding_dim;
}

void EncoderSpec::validate() const {
  if (input_dim <= 0) throw Error(ErrorCode::kInvalidArgument, "encoder input_dim must be positive");
  if (embedding_dim < 2) throw Error(ErrorCode::kInvalidArgument, "encoder embedding_dim must be >= 2");
  for (Index w : hidden_widths) {
    if (w <= 0) throw Error(ErrorCode::kInvalidArgument, "encoder hidden widths must be positive");
  }
}

Encoder::Encoder(EncoderSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::mt19937_64 rng(spec_.init_seed);
  Index in = spec_.input_dim;
  auto add_layer = [&](Index out) {
    std::normal_distribution<double> draw(0.0, std::sqrt(2.0 / static_cast<double>(in)));
    DenseLayer layer{Matrix(out, in), Vector::Zero(out)};
    for (Index j = 0; j < in; ++j) {
      for (Index i = 0; i < out; ++i) layer.weight(i, j) = draw(rng);
    }
    layers_.push_back(std::move(layer));
    in = out;
  };
  for (Index w : spec_.hidden_widths) add_layer(w);
  add_layer(spec_.embedding_dim);
}

Encoder::Encoder(EncoderSpec spec, std::vector<DenseLayer> layers)
    : spec_(std::move(spec)), layers_(std::move(layers)) {
  spec_.validate();
  if (layers_.size() != spec_.hidden_widths.size() + 1) {
    throw Error(ErrorCode::kShapeMismatch, "layer count does not match encoder spec");
  }
  Index in = spec_.input_dim;
  for (size_t l = 0; l < layers_.size(); ++l) {
    const Index out = l < spec_.hidden_widths.size() ? spec_.hidden_widths[l] : spec_.embedding_dim;
    if (layers_[l].weight.rows() != out || layers_[l].weight.cols() != in || layers_[l].bias.size() != out) {
      throw Error(ErrorCode::kShapeMismatch, "layer " + std::to_string(l) + " shape does not match spec");
    }
    in = out;
  }
}

Matrix Encoder::forward(const Matrix& inputs) const { return forward(inputs, nullptr); }

Matrix Encoder::forward(const Matrix& inputs, ForwardCache* cache) const {
  if (inputs.rows() != spec_.input_dim) {
    throw Error(ErrorCode::kDimensionMismatch, "encoder expects input dimension " +
                                                   std::to_string(spec_.input_dim) + ", got " +
                                                   std::to_string(inputs.rows()));
  }
  if (cache != nullptr) {
    cache->inputs.clear();
    cache->pre_activations.clear();
  }
  Matrix x = inputs;
  for (size_t l = 0; l < layers_.size(); ++l) {
    if (cache != nullptr) cache->inputs.push_back(x);
    Matrix pre = (layers_[l].weight * x).colwise() + layers_[l].bias;
    if (l + 1 == layers_.size()) return pre;
    x = activate(pre, spec_.activation);
    if (cache != nullptr) cache->pre_activations.push_back(std::move(pre));
  }
  return x;
}

Vector Encoder::embed(const Vector& input) const { return forward(input); }

std::vector<DenseLayer> Encoder::backward(const ForwardCache& cache, const Matrix& d_output) const {
  std::vector<DenseLayer> grads(layers_.size());
  Matrix upstream = d_output;
  for (size_t l = layers_.size(); l-- > 0;) {
    grads[l].weight = upstream * cache.inputs[l].transpose();
    grads[l].bias = upstream.rowwise().sum();
    if (l == 0) break;
    upstream = activation_backward(cache.pre_activations[l - 1], layers_[l].weight.transpose() * upstream,
                                   spec_.activation);
  }
  return grads;
}

std::string Encoder::digest() const {
  Sha256 hasher;
  hasher.update(std::to_string(spec_.input_dim) + "/" + std::to_string(spec_.embedding_dim) + "/" +
                std::string(ActivationName(spec_.activation)));
  for (Index w : spec_.hidden_widths) hasher.update("," + std::to_string(w));
  for (const DenseLayer& layer : layers_) {
    hasher.update(layer.weight);
    hasher.update(layer.bias);
  }
  return hasher.hex();
}

bool Encoder::operator==(const Encoder& other) const {
  if (!(spec_ == other.spec_) || layers_.size() != other.layers_.size()) return false;
  for (size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].weight != other.layers_[l].weight || layers_[l].bias != other.layers_[l].bias) return false;
  }
  return true;
}

}  // namespace fairkd
