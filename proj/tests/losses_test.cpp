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

#include <cmath>
#include <numbers>
#include <random>

#include "fairkd/losses.hpp"
#include "gradient_check.hpp"

namespace fairkd {
namespace {

using testing::random_vector;

Matrix unit_prototypes() { return Matrix::Identity(2, 2); }

TEST(ArcFaceLogits, ZeroMarginIsScaledCosine) {
  const Vector logits = margin_logits_arcface(Vector{{1.0, 0.0}}, unit_prototypes(), 0, MarginConfig::ArcFace(1.0, 0.0));
  EXPECT_DOUBLE_EQ(logits[0], 1.0);
  EXPECT_DOUBLE_EQ(logits[1], 0.0);
}

TEST(ArcFaceLogits, AlignedTarget) {
  const Vector logits =
      margin_logits_arcface(Vector{{1.0, 0.0}}, unit_prototypes(), 0, MarginConfig::ArcFace(64.0, 0.5));
  EXPECT_NEAR(logits[0], 64.0 * std::cos(0.5), 1e-9);
  EXPECT_NEAR(logits[0], 56.165, 1e-3);
  EXPECT_NEAR(logits[1], 0.0, 1e-12);
}

TEST(ArcFaceLogits, SixtyDegrees) {
  const double theta = std::numbers::pi / 3.0;
  const Vector z{{std::cos(theta), std::sin(theta)}};
  const Vector logits = margin_logits_arcface(z, unit_prototypes(), 0, MarginConfig::ArcFace(64.0, 0.5));
  EXPECT_NEAR(logits[0], 1.510, 1e-2);
  EXPECT_NEAR(logits[0], 64.0 * std::cos(theta + 0.5), 1e-9);
  EXPECT_NEAR(logits[1], 64.0 * std::sin(theta), 1e-9);
}

TEST(ArcFaceLogits, FallbackBeyondPi) {
  // theta = 0.9 pi, theta + m > pi: target uses cos(theta) - m sin(m).
  const double theta = 0.9 * std::numbers::pi;
  const double m = 0.5;
  const Vector z{{std::cos(theta), std::sin(theta)}};
  const Vector logits = margin_logits_arcface(z, unit_prototypes(), 0, MarginConfig::ArcFace(2.0, m));
  EXPECT_NEAR(logits[0], 2.0 * (std::cos(theta) - m * std::sin(m)), 1e-12);
}

TEST(ArcFaceLogits, TargetMonotoneInAngle) {
  double previous = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 200; ++i) {
    const double theta = std::numbers::pi * i / 200.0;
    const Vector z{{std::cos(theta), std::sin(theta)}};
    const double t = margin_logits_arcface(z, unit_prototypes(), 0, MarginConfig::ArcFace(8.0, 0.5))[0];
    EXPECT_LE(t, previous + 1e-12) << "theta=" << theta;
    previous = t;
  }
}

TEST(ArcFaceLogits, Errors) {
  const MarginConfig cfg = MarginConfig::ArcFace();
  EXPECT_THROW(margin_logits_arcface(Vector::Zero(2), unit_prototypes(), 0, cfg), Error);
  EXPECT_THROW(margin_logits_arcface(Vector::Ones(2), unit_prototypes(), 2, cfg), Error);
  EXPECT_THROW(margin_logits_arcface(Vector::Ones(3), unit_prototypes(), 0, cfg), Error);
}

TEST(ElasticLogits, ZeroStdMatchesArcFaceBitwise) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector z = random_vector(rng, 8);
    const Matrix protos = testing::unflatten(random_vector(rng, 40), 5, 8);
    std::mt19937_64 draw(trial);
    const Vector a = margin_logits_elastic(z, protos, 1, MarginConfig::ElasticArcFace(64.0, 0.5, 0.0), draw);
    const Vector b = margin_logits_arcface(z, protos, 1, MarginConfig::ArcFace(64.0, 0.5));
    EXPECT_TRUE((a.array() == b.array()).all());
  }
}

TEST(ElasticLogits, SameSeedSameOutput) {
  const MarginConfig cfg = MarginConfig::ElasticArcFace();
  const Vector z{{0.3, 0.7}};
  std::mt19937_64 r1(42), r2(42);
  EXPECT_TRUE((margin_logits_elastic(z, unit_prototypes(), 0, cfg, r1).array() ==
               margin_logits_elastic(z, unit_prototypes(), 0, cfg, r2).array())
                  .all());
}

TEST(ElasticLogits, MarginMeanMatchesConfig) {
  const MarginConfig cfg = MarginConfig::ElasticArcFace(64.0, 0.5, 0.05);
  std::mt19937_64 rng(123);
  double sum = 0.0;
  for (int i = 0; i < 10000; ++i) sum += sample_elastic_margin(cfg, rng);
  EXPECT_NEAR(sum / 10000.0, 0.5, 0.005);
}

TEST(AdaFaceLogits, NormAtMeanGivesPlainMargin) {
  const std::vector<double> norms{2.0, 4.0};
  NormStats stats = NormStats::FromNorms(norms);
  const Vector z{{3.0, 0.0}};  // norm equals mean_norm
  const Vector logits = margin_logits_adaface(z, unit_prototypes(), 0, MarginConfig::AdaFace(60.0, 0.4), stats);
  EXPECT_NEAR(logits[0], 36.0, 1e-6);
}

TEST(AdaFaceLogits, ClippedHighNorm) {
  const std::vector<double> norms{1.0, 1.2};
  NormStats stats = NormStats::FromNorms(norms);
  const Vector z{{90.0, 0.0}};
  const Vector logits = margin_logits_adaface(z, unit_prototypes(), 0, MarginConfig::AdaFace(60.0, 0.4), stats);
  EXPECT_NEAR(logits[0], 60.0 * (std::cos(-0.4) - 0.8), 1e-9);
  EXPECT_NEAR(logits[0], 7.263, 1e-2);
}

TEST(AdaFaceLogits, ZeroMarginIsScaledCosine) {
  std::mt19937_64 rng(5);
  const std::vector<double> norms{1.0, 5.0, 9.0};
  for (int trial = 0; trial < 20; ++trial) {
    NormStats stats = NormStats::FromNorms(norms);
    const Vector z = random_vector(rng, 4, 3.0);
    const Matrix protos = testing::unflatten(random_vector(rng, 12), 3, 4);
    const Vector logits = margin_logits_adaface(z, protos, 2, MarginConfig::AdaFace(30.0, 0.0), stats);
    for (Index j = 0; j < 3; ++j) {
      EXPECT_NEAR(logits[j], 30.0 * cosine_similarity(z, Vector(protos.row(j).transpose())), 1e-12);
    }
  }
}

TEST(AdaFaceLogits, UpdatesStatsAfterComputingMargin) {
  const std::vector<double> norms{2.0, 4.0};
  NormStats stats = NormStats::FromNorms(norms);
  const NormStats before = stats;
  margin_logits_adaface(Vector{{10.0, 0.0}}, unit_prototypes(), 0, MarginConfig::AdaFace(), stats);
  EXPECT_NEAR(stats.mean_norm, 0.99 * before.mean_norm + 0.01 * 10.0, 1e-12);
  EXPECT_EQ(stats.std_norm, before.std_norm);
}

TEST(AdaFaceLogits, UninitializedStatsThrow) {
  NormStats stats;
  try {
    margin_logits_adaface(Vector{{1.0, 0.0}}, unit_prototypes(), 0, MarginConfig::AdaFace(), stats);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUninitializedStats);
  }
}

TEST(CrossEntropy, Examples) {
  EXPECT_NEAR(cross_entropy(Vector{{0.0, 0.0}}, 0), std::log(2.0), 1e-12);
  EXPECT_NEAR(cross_entropy(Vector{{0.0, 0.0}}, 0), 0.69315, 1e-5);
  EXPECT_LT(cross_entropy(Vector{{100.0, 0.0}}, 0), 1e-10);
  EXPECT_NEAR(cross_entropy(Vector{{1.0, 2.0, 3.0}}, 2), 0.40761, 1e-5);
}

TEST(CrossEntropy, StableForHugeLogits) {
  const double l = cross_entropy(Vector{{1e6, 1e6 - 1.0}}, 1);
  EXPECT_NEAR(l, 1.0 + std::log1p(std::exp(-1.0)), 1e-9);
}

TEST(CrossEntropy, ShiftInvariantAndNonNegative) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector logits = random_vector(rng, 6, 5.0);
    const double l = cross_entropy(logits, trial % 6);
    EXPECT_GE(l, 0.0);
    EXPECT_NEAR(l, cross_entropy(Vector(logits.array() + 17.5), trial % 6), 1e-10);
  }
}

TEST(KdEmbeddingLoss, Examples) {
  const Vector e{{0.2, -1.0, 3.0}};
  EXPECT_EQ(kd_embedding_loss(e, e), 0.0);
  EXPECT_DOUBLE_EQ(kd_embedding_loss(Vector{{1.0, 0.0, 0.0, 0.0}}, Vector::Zero(4)), 0.25);
  EXPECT_DOUBLE_EQ(kd_embedding_loss(Vector{{1.0, 2.0}}, Vector{{3.0, 2.0}}), 2.0);
  EXPECT_DOUBLE_EQ(kd_embedding_loss(Vector{{1.0, 2.0}}, Vector{{3.0, 2.0}}, KdReduction::kSum), 4.0);
}

TEST(KdEmbeddingLoss, GradientVanishesAtMinimum) {
  const Vector e{{0.2, -1.0, 3.0}};
  EXPECT_EQ(kd_embedding_gradient(e, e).norm(), 0.0);
}

TEST(KdEmbeddingLoss, DimensionMismatchThrows) {
  EXPECT_THROW(kd_embedding_loss(Vector::Ones(2), Vector::Ones(3)), Error);
}

TEST(TotalLoss, Examples) {
  EXPECT_DOUBLE_EQ(total_loss(2.0, 0.5, 1.0), 2.5);
  EXPECT_DOUBLE_EQ(total_loss(2.0, 0.5, 0.0), 2.0);
  EXPECT_DOUBLE_EQ(total_loss(1.0, 0.25, 2.0), 1.5);
}

TEST(TotalLoss, RejectsNegativeInputs) {
  EXPECT_THROW(total_loss(1.0, -0.1, 1.0), Error);
  EXPECT_THROW(total_loss(1.0, 0.1, -1.0), Error);
}

TEST(MarginConfig, Validation) {
  EXPECT_NO_THROW(MarginConfig::AdaFace().validate());
  MarginConfig bad = MarginConfig::ArcFace();
  bad.s = 0.0;
  EXPECT_THROW(bad.validate(), Error);
  bad = MarginConfig::ArcFace(64.0, 2.0);
  EXPECT_THROW(bad.validate(), Error);
  EXPECT_EQ(ParseMarginKind(MarginKindName(MarginKind::kElasticArcFace)), MarginKind::kElasticArcFace);
  EXPECT_THROW(ParseMarginKind("softmax"), Error);
}

TEST(NormStats, FromNormsUsesSampleStd) {
  const std::vector<double> norms{1.0, 2.0, 3.0};
  const NormStats s = NormStats::FromNorms(norms);
  EXPECT_DOUBLE_EQ(s.mean_norm, 2.0);
  EXPECT_DOUBLE_EQ(s.std_norm, 1.0);
  EXPECT_DOUBLE_EQ(s.norm_hat(2.0, 0.333), 0.0);
  EXPECT_DOUBLE_EQ(s.norm_hat(50.0, 0.333), 1.0);
  EXPECT_NEAR(s.norm_hat(0.0, 0.333), (NormStats::kMinNorm - 2.0) * 0.333, 1e-12);
}

class HeadGradientCheck : public ::testing::TestWithParam<int> {};

TEST_P(HeadGradientCheck, MatchFiniteDifferences) {
  const testing::GradientErrors e = testing::gradient_errors(static_cast<std::uint64_t>(GetParam()));
  EXPECT_LE(e.arcface, 1e-4);
  EXPECT_LE(e.elastic, 1e-4);
  EXPECT_LE(e.adaface, 1e-4);
  EXPECT_LE(e.kd, 1e-4);
  EXPECT_LE(e.total, 1e-4);
}

INSTANTIATE_TEST_SUITE_P(Seeds, HeadGradientCheck, ::testing::Range(0, 20));

TEST(BatchMarginLoss, MeanOfPerSampleHeads) {
  std::mt19937_64 rng(77);
  const Matrix z = testing::unflatten(random_vector(rng, 8 * 4, 2.0), 8, 4);
  const Matrix protos = testing::unflatten(random_vector(rng, 5 * 8), 5, 8);
  const std::vector<Index> labels{0, 3, 3, 4};
  const std::vector<TargetMargin> margins(4, TargetMargin{0.5, 0.0});
  const BatchHeadResult batch = batch_margin_loss(z, protos, labels, 32.0, margins);
  double sum = 0.0;
  Matrix d_protos = Matrix::Zero(5, 8);
  for (Index b = 0; b < 4; ++b) {
    const HeadGradients g = margin_loss_gradients(z.col(b), protos, labels[b], 32.0, margins[b]);
    sum += g.loss;
    EXPECT_LT((batch.d_embeddings.col(b) - g.d_embedding / 4.0).norm(), 1e-12);
    d_protos += g.d_prototypes / 4.0;
  }
  EXPECT_NEAR(batch.mean_loss, sum / 4.0, 1e-12);
  EXPECT_LT((batch.d_prototypes - d_protos).norm(), 1e-12);
}

}  // namespace
}  // namespace fairkd
