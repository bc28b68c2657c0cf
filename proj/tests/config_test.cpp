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

#include <cstdlib>
#include <functional>
#include <set>

#include "fairkd/config.hpp"
#include "fairkd/digest.hpp"
#include "fairkd/io.hpp"

namespace fairkd {
namespace {

std::string config_error(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfigError) << e.what();
    return e.what();
  }
  ADD_FAILURE() << "no error thrown";
  return {};
}

TEST(RunConfig, DefaultsAreValidDeskSettings) {
  const RunConfig c = RunConfig::Defaults();
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.train.epochs, 26);
  EXPECT_EQ(c.train.batch_size, 64);
  EXPECT_EQ(c.train.base_lr, 0.1);
  EXPECT_EQ(c.train.lr_milestones, (std::vector<int>{8, 14, 20, 25}));
  EXPECT_EQ(c.universe.n_groups, 4);
  EXPECT_GT(c.teacher.parameter_count(), c.student.parameter_count());
}

TEST(RunConfig, EmptyTextGivesDefaults) {
  EXPECT_EQ(RunConfig::Parse("").digest(), RunConfig::Defaults().digest());
  EXPECT_EQ(RunConfig::Parse("{}").digest(), RunConfig::Defaults().digest());
}

TEST(RunConfig, PartialJsonOverlaysDefaults) {
  const RunConfig c = RunConfig::Parse(R"({"train": {"epochs": 3, "lr_milestones": [1]}, "seed": 7})");
  EXPECT_EQ(c.train.epochs, 3);
  EXPECT_EQ(c.train.lr_milestones, std::vector<int>{1});
  EXPECT_EQ(c.train.batch_size, 64);
  EXPECT_EQ(c.seed, 7u);
}

TEST(RunConfig, DottedOverrides) {
  const std::vector<std::string> sets{"train.epochs=2", "train.lr_milestones=[1]", "loss.margin.kind=arcface",
                                      "teacher.hidden_widths=[8,8]"};
  const RunConfig c = RunConfig::Parse("", sets);
  EXPECT_EQ(c.train.epochs, 2);
  EXPECT_EQ(c.loss.margin.kind, MarginKind::kArcFace);
  EXPECT_EQ(c.teacher.hidden_widths, (std::vector<Index>{8, 8}));
}

TEST(RunConfig, UnknownKeyNamesTheKey) {
  EXPECT_NE(config_error([] { RunConfig::Parse(R"({"train": {"epoch": 3}})"); }).find("epoch"), std::string::npos);
  const std::vector<std::string> sets{"universe.colour=3"};
  EXPECT_NE(config_error([&] { RunConfig::Parse("", sets); }).find("colour"), std::string::npos);
}

TEST(RunConfig, BadValuesAreConfigErrors) {
  config_error([] { RunConfig::Parse(R"({"train": {"epochs": "many"}})"); });
  config_error([] { RunConfig::Parse(R"({"train": {"batch_size": 0}})"); });
  config_error([] { RunConfig::Parse(R"({"loss": {"margin": {"kind": "softmax"}}})"); });
  config_error([] { RunConfig::Parse("{not json"); });
  config_error([] { RunConfig::Parse(R"({"universe": {"noise_scales": [0.1]}})"); });
  const std::vector<std::string> sets{"train.epochs"};
  config_error([&] { RunConfig::Parse("", sets); });
}

TEST(RunConfig, TeacherAndStudentMustShareEmbeddingDim) {
  config_error([] { RunConfig::Parse(R"({"student": {"embedding_dim": 8}})"); });
}

TEST(RunConfig, CanonicalJsonRoundTrip) {
  const std::vector<std::string> sets{"seed=42", "loss.lambda=3.5"};
  const RunConfig c = RunConfig::Parse("", sets);
  EXPECT_EQ(RunConfig::Parse(c.to_json()).to_json(), c.to_json());
  EXPECT_EQ(c.digest(), sha256_hex(c.to_json()));
  EXPECT_EQ(c.digest().size(), 64u);
}

TEST(RunConfig, DigestIgnoresKeyOrderAndWhitespace) {
  const RunConfig a = RunConfig::Parse(R"({"seed": 3, "train": {"epochs": 4, "lr_milestones": [2]}})");
  const RunConfig b = RunConfig::Parse("{\n  \"train\": {\"lr_milestones\": [2],\n \"epochs\": 4},\n  \"seed\": 3\n}");
  EXPECT_EQ(a.digest(), b.digest());
  EXPECT_NE(a.digest(), RunConfig::Defaults().digest());
}

TEST(SeedFor, StreamsAreDistinctAndStable) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t seed : {0ull, 1ull, 2ull}) {
    for (SeedStream s : {SeedStream::kUniverse, SeedStream::kTrain, SeedStream::kTeacherInit, SeedStream::kStudentInit,
                         SeedStream::kProtocol, SeedStream::kFolds}) {
      EXPECT_TRUE(seen.insert(seed_for(seed, s)).second);
      EXPECT_EQ(seed_for(seed, s), seed_for(seed, s));
    }
  }
}

TEST(Resolved, DerivedSeedsAndDimensions) {
  const RunConfig c = RunConfig::Defaults();
  EXPECT_EQ(resolved_universe(c).seed, seed_for(c.seed, SeedStream::kUniverse));
  EXPECT_EQ(resolved_train(c).seed, seed_for(c.seed, SeedStream::kTrain));
  const EncoderSpec t = resolved_encoder(c, true);
  EXPECT_EQ(t.input_dim, c.universe.feature_dim);
  EXPECT_EQ(t.init_seed, seed_for(c.seed, SeedStream::kTeacherInit));
  EXPECT_EQ(resolved_encoder(c, false).init_seed, seed_for(c.seed, SeedStream::kStudentInit));
}

TEST(ShippedConfig, MatchesDefaults) {
  const std::string path = std::string(FAIRKD_FIXTURE_DIR) + "/../configs/default.json";
  EXPECT_EQ(RunConfig::Parse(read_file(path)).digest(), RunConfig::Defaults().digest());
}

TEST(LocateConfig, MissingExplicitFileIsConfigError) {
  config_error([] { locate_config(std::string("/nonexistent/fairkd.json")); });
}

TEST(LocateConfig, EnvironmentDirectory) {
  const std::string dir = std::string(FAIRKD_FIXTURE_DIR) + "/../configs";
  ::setenv("FAIRKD_CONFIG_DIR", dir.c_str(), 1);
  const auto found = locate_config(std::nullopt);
  ASSERT_TRUE(found.has_value());
  EXPECT_EQ(found->filename(), "default.json");
  EXPECT_TRUE(locate_config(std::string("default.json")).has_value());
  ::unsetenv("FAIRKD_CONFIG_DIR");
  EXPECT_FALSE(locate_config(std::nullopt).has_value());
}

}  // namespace
}  // namespace fairkd
