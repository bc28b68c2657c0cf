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

#include <algorithm>
#include <cmath>
#include <string>

#include "fairkd/error.hpp"

namespace fairkd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Vectors with norm at or below this are treated as zero.
inline constexpr double kZeroNormEpsilon = 1e-12;

inline constexpr const char* kToolVersion = "fairkd 0.1.0";

/// Returns v / ||v||. Throws ZeroVector when ||v|| <= kZeroNormEpsilon.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> l2_normalize(
    const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Scalar norm = v.norm();
  if (!(norm > Scalar(kZeroNormEpsilon))) {
    throw Error(ErrorCode::kZeroVector, "cannot normalize a vector of norm " + std::to_string(norm));
  }
  return v / norm;
}

/// Cosine of the angle between a and b, clamped into [-1, 1].
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_similarity(const Eigen::MatrixBase<DerivedA>& a,
                                            const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "cosine_similarity: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (!(na > Scalar(kZeroNormEpsilon)) || !(nb > Scalar(kZeroNormEpsilon))) {
    throw Error(ErrorCode::kZeroVector, "cosine_similarity of a zero vector");
  }
  const Scalar c = a.dot(b) / (na * nb);
  return std::clamp(c, Scalar(-1), Scalar(1));
}

/// Column-wise normalization; columns with zero norm throw ZeroVector.
Matrix normalize_columns(const Matrix& m);

/// Row-wise normalization; rows with zero norm throw ZeroVector.
Matrix normalize_rows(const Matrix& m);

/// True when every coefficient is finite.
template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace fairkd
