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

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <string_view>

namespace fairkd {

/// Incremental SHA-256 over arbitrary byte sequences (OpenSSL EVP backend).
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::string_view bytes);

  template <typename Derived>
  Sha256& update(const Eigen::DenseBase<Derived>& m) {
    const Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> dense = m;
    return update(std::string_view(reinterpret_cast<const char*>(dense.data()),
                                   sizeof(typename Derived::Scalar) * static_cast<size_t>(dense.size())));
  }

  /// Lowercase hex digest; the hasher cannot be updated afterwards.
  std::string hex();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string sha256_hex(std::string_view bytes);

}  // namespace fairkd
