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

#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "fairkd/core.hpp"

namespace fairkd {
namespace {

void expect_error(ErrorCode code, const std::function<void()>& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected " << ErrorCodeName(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

TEST(L2Normalize, ThreeFourFive) {
  const Vector v = l2_normalize(Vector{{3.0, 4.0}});
  EXPECT_DOUBLE_EQ(v[0], 0.6);
  EXPECT_DOUBLE_EQ(v[1], 0.8);
}

TEST(L2Normalize, ZeroVectorThrows) {
  expect_error(ErrorCode::kZeroVector, [] { l2_normalize(Vector::Zero(2)); });
  expect_error(ErrorCode::kZeroVector, [] { l2_normalize(Vector::Constant(3, 1e-14)); });
}

TEST(L2Normalize, IdempotentAndUnitNorm) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    Vector v(8);
    for (Index i = 0; i < v.size(); ++i) v[i] = n(rng);
    const Vector u = l2_normalize(v);
    EXPECT_NEAR(u.norm(), 1.0, 1e-12);
    EXPECT_LT((l2_normalize(u) - u).norm(), 1e-15);
  }
}

TEST(L2Normalize, WorksOnFloatBlocks) {
  Eigen::Matrix3f m = Eigen::Matrix3f::Identity() * 2.0f;
  const Eigen::VectorXf col = l2_normalize(m.col(1));
  EXPECT_FLOAT_EQ(col[1], 1.0f);
}

TEST(CosineSimilarity, FortyFiveDegrees) {
  EXPECT_NEAR(cosine_similarity(Vector{{1.0, 1.0}}, Vector{{1.0, 0.0}}), 0.70711, 1e-5);
}

TEST(CosineSimilarity, SymmetricScaleInvariantAndBounded) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int trial = 0; trial < 200; ++trial) {
    Vector a(6), b(6);
    for (Index i = 0; i < 6; ++i) {
      a[i] = n(rng);
      b[i] = n(rng);
    }
    const double c = cosine_similarity(a, b);
    EXPECT_GE(c, -1.0);
    EXPECT_LE(c, 1.0);
    EXPECT_NEAR(c, cosine_similarity(b, a), 1e-15);
    EXPECT_NEAR(c, cosine_similarity(Vector(scale(rng) * a), Vector(scale(rng) * b)), 1e-12);
  }
}

TEST(CosineSimilarity, SelfIsOne) {
  const Vector a{{0.3, -2.0, 5.0}};
  EXPECT_NEAR(cosine_similarity(a, a), 1.0, 1e-15);
}

TEST(CosineSimilarity, Errors) {
  expect_error(ErrorCode::kDimensionMismatch, [] { cosine_similarity(Vector::Ones(2), Vector::Ones(3)); });
  expect_error(ErrorCode::kZeroVector, [] { cosine_similarity(Vector::Ones(2), Vector::Zero(2)); });
}

TEST(NormalizeColumns, EachColumnUnit) {
  Matrix m(2, 3);
  m << 3, 0, 1,
       4, 2, 1;
  const Matrix n = normalize_columns(m);
  for (Index j = 0; j < n.cols(); ++j) EXPECT_NEAR(n.col(j).norm(), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(n(0, 0), 0.6);
  expect_error(ErrorCode::kZeroVector, [] { normalize_columns(Matrix::Zero(2, 2)); });
}

TEST(NormalizeRows, EachRowUnit) {
  Matrix m(2, 2);
  m << 3, 4,
       0, 5;
  const Matrix n = normalize_rows(m);
  EXPECT_DOUBLE_EQ(n(0, 1), 0.8);
  EXPECT_DOUBLE_EQ(n(1, 1), 1.0);
}

TEST(ErrorCodeName, NamesAreStable) {
  EXPECT_EQ(ErrorCodeName(ErrorCode::kZeroVector), "ZeroVector");
  EXPECT_EQ(ErrorCodeName(ErrorCode::kOddPairCount), "OddPairCount");
}

}  // namespace
}  // namespace fairkd
