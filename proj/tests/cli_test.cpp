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

#include <unistd.h>

#include "cli_pipeline.hpp"
#include "fairkd/checkpoint.hpp"
#include "fairkd/config.hpp"
#include "fairkd/evaluation.hpp"
#include "fairkd/sampling.hpp"
#include "json.hpp"

namespace fairkd {
namespace {

namespace fs = std::filesystem;
using testing::fresh_dir;
using testing::run_tool;

std::string unique(const std::string& name) { return "fairkd_cli_" + name + "_" + std::to_string(::getpid()); }

class PipelineTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    first_dir_ = new fs::path(fresh_dir(unique("a")));
    second_dir_ = new fs::path(fresh_dir(unique("b")));
    first_ = new testing::PipelineRun(testing::run_pipeline(*first_dir_));
    second_ = new testing::PipelineRun(testing::run_pipeline(*second_dir_));
  }
  static void TearDownTestSuite() {
    fs::remove_all(*first_dir_);
    fs::remove_all(*second_dir_);
    delete first_;
    delete second_;
    delete first_dir_;
    delete second_dir_;
  }
  static fs::path* first_dir_;
  static fs::path* second_dir_;
  static testing::PipelineRun* first_;
  static testing::PipelineRun* second_;
};

fs::path* PipelineTest::first_dir_ = nullptr;
fs::path* PipelineTest::second_dir_ = nullptr;
testing::PipelineRun* PipelineTest::first_ = nullptr;
testing::PipelineRun* PipelineTest::second_ = nullptr;

TEST_F(PipelineTest, EveryCommandSucceeds) {
  EXPECT_TRUE(first_->failures.empty()) << first_->failures.front();
  for (const char* name : {"real_train.manifest", "real_train.features", "synthetic_train.manifest",
                           "synthetic_train.features", "eval.manifest", "eval.features", "eval.protocol",
                           "merged.manifest", "mix.manifest", "teacher.ckpt", "scratch.ckpt", "kd.ckpt",
                           "kd.ckpt.trace.csv", "scratch.report.json", "kd.report.json", "kd.table.md", "table.csv"}) {
    EXPECT_TRUE(first_->artifacts.count(name)) << name;
  }
}

TEST_F(PipelineTest, RerunIsByteIdentical) {
  ASSERT_EQ(first_->artifacts.size(), second_->artifacts.size());
  for (const auto& [name, bytes] : first_->artifacts) {
    ASSERT_TRUE(second_->artifacts.count(name)) << name;
    EXPECT_TRUE(second_->artifacts.at(name) == bytes) << name << " differs between runs";
  }
}

TEST_F(PipelineTest, TeacherCheckpointUntouchedByDistill) {
  EXPECT_TRUE(first_->teacher_unchanged_by_distill);
}

TEST_F(PipelineTest, ArtifactsCarryProvenance) {
  const std::string digest = RunConfig::Parse(testing::kSmallConfig).digest();
  const PairProtocol protocol = PairProtocol::parse(first_->artifacts.at("eval.protocol"));
  bool has_digest = false;
  for (const auto& [k, v] : protocol.header) has_digest |= k == "config_digest" && v == digest;
  EXPECT_TRUE(has_digest);
  const Checkpoint kd = checkpoint_load(*first_dir_ / "kd.ckpt");
  EXPECT_EQ(kd.config_digest, digest);
  EXPECT_EQ(kd.role, "student");
  const auto meta = nlohmann::json::parse(kd.metadata_json);
  EXPECT_EQ(meta.at("distillation"), "kd");
  EXPECT_EQ(meta.at("teacher_digest"), checkpoint_load(*first_dir_ / "teacher.ckpt").encoder.digest());
  EXPECT_EQ(EvalReport::from_json(first_->artifacts.at("kd.report.json")).config_digest, digest);
}

TEST_F(PipelineTest, MixHonoursRealFraction) {
  const ManifestStats stats = manifest_stats(DatasetManifest::parse(first_->artifacts.at("mix.manifest")));
  EXPECT_EQ(stats.total().identities, 40);
  EXPECT_NEAR(stats.real_identity_share(), 0.7, 1.0 / 40.0);
}

TEST_F(PipelineTest, TraceFollowsSchedule) {
  const std::string& trace = first_->artifacts.at("kd.ckpt.trace.csv");
  EXPECT_NE(trace.find("epoch,lr,total_loss,cls_loss,kd_loss"), std::string::npos);
  EXPECT_NE(trace.find("\n0,0.1,"), std::string::npos);
  EXPECT_NE(trace.find("\n2,0.01,"), std::string::npos);
}

TEST_F(PipelineTest, ReportTableListsBothModels) {
  const std::string& csv = first_->artifacts.at("table.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_NE(csv.find(",kd,"), std::string::npos);
}

TEST(Cli, MalformedConfigWritesNothing) {
  const fs::path dir = fresh_dir(unique("bad"));
  write_file_atomic(dir / "bad.json", R"({"train": {"epochs": "x"}})");
  const testing::CliResult r =
      run_tool({"synth-gen", "--config", (dir / "bad.json").string(), "--out", (dir / "out").string()});
  EXPECT_EQ(r.code, kExitUsageError);
  EXPECT_NE(r.err.find("epochs"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "out") && !fs::is_empty(dir / "out"));
  fs::remove_all(dir);
}

TEST(Cli, UnknownOverrideKeyIsUsageError) {
  const fs::path dir = fresh_dir(unique("key"));
  const testing::CliResult r = run_tool({"synth-gen", "--set", "universe.nope=1", "--out", dir.string()});
  EXPECT_EQ(r.code, kExitUsageError);
  EXPECT_TRUE(fs::is_empty(dir));
  fs::remove_all(dir);
}

TEST(Cli, DistillWithoutTeacherIsUsageError) {
  const testing::CliResult r = run_tool({"distill", "--manifest", "x.manifest", "--out", "y.ckpt"});
  EXPECT_EQ(r.code, kExitUsageError);
}

TEST(Cli, MissingRequiredOptionIsUsageError) {
  EXPECT_EQ(run_tool({"train", "--manifest", "x.manifest"}).code, kExitUsageError);
  EXPECT_EQ(run_tool({"no-such-command"}).code, kExitUsageError);
}

TEST(Cli, HelpExitsZero) {
  const testing::CliResult r = run_tool({"--help"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE((r.out + r.err).find("verify-tables"), std::string::npos);
}

TEST(Cli, DuplicateIdentityAcrossInputsIsDomainError) {
  const fs::path dir = fresh_dir(unique("dup"));
  DatasetManifest m;
  m.name = "m";
  m.num_groups = 2;
  m.entries.push_back({"a-0", "a", Source::kReal, Vector{{1.0, 0.0}}, "f#a-0"});
  write_file_atomic(dir / "one.manifest", m.serialize());
  write_file_atomic(dir / "two.manifest", m.serialize());
  const testing::CliResult r = run_tool({"merge", (dir / "one.manifest").string(), (dir / "two.manifest").string(),
                                         "--total", "2", "--out", (dir / "out.manifest").string()});
  EXPECT_EQ(r.code, kExitDomainError);
  EXPECT_NE(r.err.find("DuplicateIdentityAcrossSources"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "out.manifest"));
  fs::remove_all(dir);
}

TEST(Cli, MissingInputFileIsDomainError) {
  EXPECT_EQ(run_tool({"merge", "/nonexistent.manifest", "--total", "2", "--out", "/tmp/x.manifest"}).code,
            kExitDomainError);
}

TEST(Cli, VerifyTablesPassesShippedFixture) {
  const testing::CliResult r = run_tool({"verify-tables", std::string(FAIRKD_FIXTURE_DIR) + "/published_tables.tsv"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("51/51 rows pass"), std::string::npos);
  EXPECT_NE(r.out.find("96.24"), std::string::npos);
}

TEST(Cli, VerifyTablesFlagsInconsistentRow) {
  const testing::CliResult r = run_tool({"verify-tables", std::string(FAIRKD_FIXTURE_DIR) + "/inconsistent_rows.tsv"});
  EXPECT_EQ(r.code, kExitDomainError);
  EXPECT_NE(r.out.find("0/1 rows pass"), std::string::npos);
  EXPECT_NE(r.out.find("FAIL"), std::string::npos);
}

}  // namespace
}  // namespace fairkd
