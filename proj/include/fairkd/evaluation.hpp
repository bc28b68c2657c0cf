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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fairkd/encoder.hpp"
#include "fairkd/feature_store.hpp"

namespace fairkd {

struct VerificationPair {
  std::string sample_a;
  std::string sample_b;
  bool same = false;

  bool operator==(const VerificationPair&) const = default;
};

struct GroupProtocol {
  std::string name;
  std::vector<VerificationPair> pairs;

  Index positives() const;
  Index negatives() const;
};

/// Per-group verification pairs. File format: "#fairkd-protocol 1", optional
/// "#key=value" lines, then "<group>\t<sample_a>\t<sample_b>\t<0|1>" records.
struct PairProtocol {
  std::vector<GroupProtocol> groups;
  std::vector<std::pair<std::string, std::string>> header;

  /// Balanced positives/negatives per group and no repeated unordered pair.
  void validate() const;

  std::string serialize() const;
  static PairProtocol parse(std::string_view text);
};

struct ScoredPair {
  double score = 0.0;
  bool same = false;
};

/// Cosine similarity of the two embeddings for every pair, in protocol order.
std::vector<ScoredPair> score_pairs(const Encoder& encoder, const GroupProtocol& group, const FeatureStore& store);

struct ThresholdAccuracy {
  double threshold = 0.0;
  double accuracy = 0.0;  // percent
};

/// Exhaustive sweep over -inf, the midpoints of adjacent distinct scores and
/// +inf, predicting "same" iff score >= threshold. Lowest threshold wins ties.
ThresholdAccuracy best_threshold_accuracy(std::span<const ScoredPair> pairs);

/// Mean held-out accuracy over k stratified folds. Positives and negatives are
/// shuffled separately from `seed`, concatenated, and dealt round-robin so
/// every fold keeps the class balance. Throws TooFewPairs when size < k.
double kfold_verification_accuracy(std::span<const ScoredPair> pairs, int k = 10, std::uint64_t seed = 0);

/// Sample standard deviation (divisor G - 1). Throws TooFewGroups for G < 2.
double fairness_std(std::span<const double> accuracies);

struct SerValue {
  double value = 1.0;       // +inf when degenerate
  bool degenerate = false;  // best group reached 100 %
};

/// (100 - min acc) / (100 - max acc).
SerValue ser(std::span<const double> accuracies);

struct ReportMetadata {
  std::string model_id;
  std::string data_id;
  std::string distillation;
  std::string loss_kind;
};

struct EvalReport {
  std::vector<std::string> group_names;
  std::vector<double> accuracies;
  double average = 0.0;
  double std = 0.0;
  SerValue ser;
  ReportMetadata metadata;
  std::string config_digest;
  std::string tool_version = kToolVersion;

  std::string to_json() const;
  static EvalReport from_json(std::string_view text);
};

EvalReport build_report(std::vector<std::string> group_names, std::vector<double> accuracies,
                        ReportMetadata metadata);

/// Round half away from zero at `decimals` places.
double round_half_away(double value, int decimals);
/// Two-decimal text after round_half_away.
std::string format_2dp(double value);

enum class TableFormat { kMarkdown, kCsv };

/// Columns: Model, Distillation, Data, Loss, one per group, Average, STD, SER.
/// Group columns come from the first report.
std::string render_table(std::span<const EvalReport> reports, TableFormat format);

// Transcribed table rows used to re-derive the Average/STD/SER columns.
struct FixtureRow {
  std::string table;
  std::string label;
  std::vector<double> accuracies;
  std::optional<double> average;
  std::optional<double> std;
  std::optional<double> ser;
  int line = 0;
};

/// Fixture format: "#fairkd-fixture 1" first line, '#' comments, then
/// tab-separated "<table>\t<label>\t<acc,acc,...>\t<avg|->\t<std|->\t<ser|->".
std::vector<FixtureRow> parse_fixture(std::string_view text);

struct FixtureCheck {
  FixtureRow row;
  double average = 0.0;
  std::optional<double> std;
  std::optional<SerValue> ser;
  bool average_ok = true;
  bool std_ok = true;
  bool ser_ok = true;

  bool pass() const { return average_ok && std_ok && ser_ok; }
};

/// Compares recomputed columns with the printed ones at two decimals.
FixtureCheck verify_fixture_row(const FixtureRow& row);

}  // namespace fairkd
