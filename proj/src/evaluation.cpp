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

#include "fairkd/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "json.hpp"

#include "fairkd/io.hpp"

namespace fairkd {
namespace {

std::string pair_key(const std::string& a, const std::string& b) {
  return a < b ? a + '\x1f' + b : b + '\x1f' + a;
}

long long hundredths(double value) { return std::llround(round_half_away(value, 2) * 100.0); }

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string or_dash(const std::string& text) { return text.empty() ? "-" : text; }

}  // namespace

Index GroupProtocol::positives() const {
  return std::count_if(pairs.begin(), pairs.end(), [](const VerificationPair& p) { return p.same; });
}

Index GroupProtocol::negatives() const { return static_cast<Index>(pairs.size()) - positives(); }

void PairProtocol::validate() const {
  std::set<std::string> names;
  for (const GroupProtocol& g : groups) {
    if (!names.insert(g.name).second) throw Error(ErrorCode::kInvalidArgument, "group '" + g.name + "' repeated");
    if (g.positives() != g.negatives()) {
      throw Error(ErrorCode::kInvalidArgument, "group '" + g.name + "' has unbalanced positives/negatives");
    }
    std::set<std::string> seen;
    for (const VerificationPair& p : g.pairs) {
      if (p.sample_a == p.sample_b) throw Error(ErrorCode::kInvalidArgument, "pair repeats sample '" + p.sample_a + "'");
      if (!seen.insert(pair_key(p.sample_a, p.sample_b)).second) {
        throw Error(ErrorCode::kInvalidArgument, "duplicate pair in group '" + g.name + "'");
      }
    }
  }
}

std::string PairProtocol::serialize() const {
  std::string out = "#fairkd-protocol 1\n";
  for (const auto& [key, value] : header) out += "#" + key + "=" + value + "\n";
  for (const GroupProtocol& g : groups) {
    for (const VerificationPair& p : g.pairs) {
      out += g.name + "\t" + p.sample_a + "\t" + p.sample_b + "\t" + (p.same ? "1" : "0") + "\n";
    }
  }
  return out;
}

PairProtocol PairProtocol::parse(std::string_view text) {
  const std::vector<std::string_view> lines = split(text, '\n');
  if (lines.empty() || trim(lines[0]) != "#fairkd-protocol 1") {
    throw Error(ErrorCode::kFormatVersionMismatch, "not a fairkd protocol file (version 1)");
  }
  PairProtocol protocol;
  std::map<std::string, size_t> index;
  for (size_t n = 1; n < lines.size(); ++n) {
    const std::string_view line = lines[n];
    if (trim(line).empty()) continue;
    if (line.starts_with('#')) {
      const size_t eq = line.find('=');
      if (eq != std::string_view::npos) {
        protocol.header.emplace_back(std::string(line.substr(1, eq - 1)), std::string(line.substr(eq + 1)));
      }
      continue;
    }
    const std::vector<std::string_view> f = split(line, '\t');
    if (f.size() != 4 || (f[3] != "0" && f[3] != "1")) {
      throw Error(ErrorCode::kIoError, "protocol line " + std::to_string(n + 1) + " is malformed");
    }
    const std::string group(f[0]);
    auto it = index.find(group);
    if (it == index.end()) {
      it = index.emplace(group, protocol.groups.size()).first;
      protocol.groups.push_back({group, {}});
    }
    protocol.groups[it->second].pairs.push_back({std::string(f[1]), std::string(f[2]), f[3] == "1"});
  }
  return protocol;
}

std::vector<ScoredPair> score_pairs(const Encoder& encoder, const GroupProtocol& group, const FeatureStore& store) {
  std::vector<ScoredPair> out;
  out.reserve(group.pairs.size());
  if (group.pairs.empty()) return out;
  Matrix inputs(store.dim(), 2 * static_cast<Index>(group.pairs.size()));
  for (size_t i = 0; i < group.pairs.size(); ++i) {
    inputs.col(2 * static_cast<Index>(i)) = store.at(group.pairs[i].sample_a);
    inputs.col(2 * static_cast<Index>(i) + 1) = store.at(group.pairs[i].sample_b);
  }
  const Matrix embeddings = encoder.forward(inputs);
  for (size_t i = 0; i < group.pairs.size(); ++i) {
    const Index a = 2 * static_cast<Index>(i);
    out.push_back({cosine_similarity(embeddings.col(a), embeddings.col(a + 1)), group.pairs[i].same});
  }
  return out;
}

ThresholdAccuracy best_threshold_accuracy(std::span<const ScoredPair> pairs) {
  if (pairs.empty()) throw Error(ErrorCode::kEmptyInput, "best_threshold_accuracy needs at least one pair");
  std::vector<ScoredPair> sorted(pairs.begin(), pairs.end());
  std::sort(sorted.begin(), sorted.end(), [](const ScoredPair& a, const ScoredPair& b) { return a.score < b.score; });
  const Index n = static_cast<Index>(sorted.size());
  const Index total_pos = std::count_if(sorted.begin(), sorted.end(), [](const ScoredPair& p) { return p.same; });

  // Threshold -inf: everything predicted "same".
  Index best_correct = total_pos;
  double best_threshold = -std::numeric_limits<double>::infinity();
  Index neg_below = 0;
  Index pos_below = 0;
  for (Index i = 0; i < n;) {
    Index j = i;
    while (j < n && sorted[j].score == sorted[i].score) {
      (sorted[j].same ? pos_below : neg_below) += 1;
      ++j;
    }
    const Index correct = neg_below + (total_pos - pos_below);
    double threshold;
    if (j < n) {
      threshold = 0.5 * (sorted[i].score + sorted[j].score);
      if (!(threshold > sorted[i].score)) threshold = sorted[j].score;
    } else {
      threshold = std::numeric_limits<double>::infinity();
    }
    if (correct > best_correct) {
      best_correct = correct;
      best_threshold = threshold;
    }
    i = j;
  }
  return {best_threshold, 100.0 * static_cast<double>(best_correct) / static_cast<double>(n)};
}

double kfold_verification_accuracy(std::span<const ScoredPair> pairs, int k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::kInvalidArgument, "k-fold needs k >= 2");
  if (static_cast<Index>(pairs.size()) < k) {
    throw Error(ErrorCode::kTooFewPairs, std::to_string(pairs.size()) + " pairs for " + std::to_string(k) + " folds");
  }
  std::vector<size_t> positives, negatives;
  for (size_t i = 0; i < pairs.size(); ++i) (pairs[i].same ? positives : negatives).push_back(i);
  std::mt19937_64 rng(seed);
  std::shuffle(positives.begin(), positives.end(), rng);
  std::shuffle(negatives.begin(), negatives.end(), rng);
  std::vector<size_t> order = positives;
  order.insert(order.end(), negatives.begin(), negatives.end());

  double sum = 0.0;
  for (int fold = 0; fold < k; ++fold) {
    std::vector<ScoredPair> train, test;
    for (size_t t = 0; t < order.size(); ++t) {
      (static_cast<int>(t % static_cast<size_t>(k)) == fold ? test : train).push_back(pairs[order[t]]);
    }
    const double threshold = best_threshold_accuracy(train).threshold;
    const auto correct = std::count_if(test.begin(), test.end(),
                                       [&](const ScoredPair& p) { return (p.score >= threshold) == p.same; });
    sum += 100.0 * static_cast<double>(correct) / static_cast<double>(test.size());
  }
  return sum / static_cast<double>(k);
}

double fairness_std(std::span<const double> accuracies) {
  if (accuracies.size() < 2) throw Error(ErrorCode::kTooFewGroups, "STD needs at least two groups");
  const double mean = std::accumulate(accuracies.begin(), accuracies.end(), 0.0) / static_cast<double>(accuracies.size());
  double sq = 0.0;
  for (double a : accuracies) sq += (a - mean) * (a - mean);
  return std::sqrt(sq / static_cast<double>(accuracies.size() - 1));
}

SerValue ser(std::span<const double> accuracies) {
  if (accuracies.empty()) throw Error(ErrorCode::kEmptyInput, "SER of no groups");
  const auto [lo, hi] = std::minmax_element(accuracies.begin(), accuracies.end());
  const double denominator = 100.0 - *hi;
  if (!(denominator > 0.0)) return {std::numeric_limits<double>::infinity(), true};
  if (*lo == *hi) return {1.0, false};
  return {(100.0 - *lo) / denominator, false};
}

EvalReport build_report(std::vector<std::string> group_names, std::vector<double> accuracies,
                        ReportMetadata metadata) {
  if (group_names.size() != accuracies.size()) {
    throw Error(ErrorCode::kShapeMismatch, "one accuracy per group required");
  }
  if (accuracies.empty()) throw Error(ErrorCode::kEmptyInput, "report without groups");
  EvalReport report;
  report.average = std::accumulate(accuracies.begin(), accuracies.end(), 0.0) / static_cast<double>(accuracies.size());
  report.std = accuracies.size() >= 2 ? fairness_std(accuracies) : 0.0;
  report.ser = ser(accuracies);
  report.group_names = std::move(group_names);
  report.accuracies = std::move(accuracies);
  report.metadata = std::move(metadata);
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["tool_version"] = tool_version;
  j["config_digest"] = config_digest;
  j["metadata"] = {{"model_id", metadata.model_id},
                   {"data_id", metadata.data_id},
                   {"distillation", metadata.distillation},
                   {"loss_kind", metadata.loss_kind}};
  nlohmann::ordered_json groups = nlohmann::ordered_json::array();
  for (size_t g = 0; g < group_names.size(); ++g) {
    groups.push_back({{"name", group_names[g]}, {"accuracy", accuracies[g]}});
  }
  j["groups"] = groups;
  j["average"] = average;
  j["std"] = std;
  j["ser"] = ser.degenerate ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(ser.value);
  j["ser_degenerate"] = ser.degenerate;
  return j.dump(2) + "\n";
}

EvalReport EvalReport::from_json(std::string_view text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (j.at("schema_version").get<int>() != 1) {
      throw Error(ErrorCode::kFormatVersionMismatch, "unsupported report schema version");
    }
    EvalReport r;
    r.tool_version = j.at("tool_version").get<std::string>();
    r.config_digest = j.at("config_digest").get<std::string>();
    const auto& m = j.at("metadata");
    r.metadata = {m.at("model_id").get<std::string>(), m.at("data_id").get<std::string>(),
                  m.at("distillation").get<std::string>(), m.at("loss_kind").get<std::string>()};
    for (const auto& g : j.at("groups")) {
      r.group_names.push_back(g.at("name").get<std::string>());
      r.accuracies.push_back(g.at("accuracy").get<double>());
    }
    r.average = j.at("average").get<double>();
    r.std = j.at("std").get<double>();
    r.ser.degenerate = j.at("ser_degenerate").get<bool>();
    r.ser.value = r.ser.degenerate ? std::numeric_limits<double>::infinity() : j.at("ser").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIoError, std::string("malformed report: ") + e.what());
  }
}

double round_half_away(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  const double scaled = value * scale;
  // Values that should sit exactly on .5 can land a hair below it in binary.
  const double nudged = scaled + std::copysign(std::abs(scaled) * 1e-12, scaled);
  return std::round(nudged) / scale;
}

std::string format_2dp(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const double rounded = round_half_away(value, 2);
  std::snprintf(buf, sizeof(buf), "%.2f", rounded == 0.0 ? 0.0 : rounded);  // no "-0.00"
  return buf;
}

std::string render_table(std::span<const EvalReport> reports, TableFormat format) {
  if (reports.empty()) return {};
  std::vector<std::string> header = {"Model", "Distillation", "Data", "Loss"};
  for (const std::string& g : reports.front().group_names) header.push_back(g);
  header.insert(header.end(), {"Average", "STD", "SER"});

  std::vector<std::vector<std::string>> rows;
  for (const EvalReport& r : reports) {
    std::vector<std::string> row = {or_dash(r.metadata.model_id), or_dash(r.metadata.distillation),
                                    or_dash(r.metadata.data_id), or_dash(r.metadata.loss_kind)};
    for (double a : r.accuracies) row.push_back(format_2dp(a));
    row.push_back(format_2dp(r.average));
    row.push_back(format_2dp(r.std));
    row.push_back(r.ser.degenerate ? "inf" : format_2dp(r.ser.value));
    rows.push_back(std::move(row));
  }

  std::string out;
  if (format == TableFormat::kCsv) {
    auto emit = [&](const std::vector<std::string>& cells) {
      for (size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + csv_field(cells[i]);
      out += '\n';
    };
    emit(header);
    for (const auto& row : rows) emit(row);
    return out;
  }
  auto emit = [&](const std::vector<std::string>& cells) {
    out += '|';
    for (const std::string& c : cells) out += " " + c + " |";
    out += '\n';
  };
  emit(header);
  out += '|';
  for (size_t i = 0; i < header.size(); ++i) out += i < 4 ? "---|" : "---:|";
  out += '\n';
  for (const auto& row : rows) emit(row);
  return out;
}

std::vector<FixtureRow> parse_fixture(std::string_view text) {
  const std::vector<std::string_view> lines = split(text, '\n');
  if (lines.empty() || trim(lines[0]) != "#fairkd-fixture 1") {
    throw Error(ErrorCode::kFixtureFormatError, "missing '#fairkd-fixture 1' header");
  }
  auto optional_value = [](std::string_view field, int line) -> std::optional<double> {
    field = trim(field);
    if (field == "-") return std::nullopt;
    try {
      return parse_double(field);
    } catch (const Error&) {
      throw Error(ErrorCode::kFixtureFormatError, "line " + std::to_string(line) + ": bad number '" +
                                                      std::string(field) + "'");
    }
  };
  std::vector<FixtureRow> rows;
  for (size_t n = 1; n < lines.size(); ++n) {
    const int line_no = static_cast<int>(n + 1);
    const std::string_view line = lines[n];
    if (trim(line).empty() || line.starts_with('#')) continue;
    const std::vector<std::string_view> f = split(line, '\t');
    if (f.size() != 6) {
      throw Error(ErrorCode::kFixtureFormatError, "line " + std::to_string(line_no) + ": expected 6 tab-separated fields");
    }
    FixtureRow row;
    row.table = std::string(trim(f[0]));
    row.label = std::string(trim(f[1]));
    for (std::string_view a : split(f[2], ',')) {
      const auto v = optional_value(a, line_no);
      if (!v) throw Error(ErrorCode::kFixtureFormatError, "line " + std::to_string(line_no) + ": missing accuracy");
      row.accuracies.push_back(*v);
    }
    if (row.accuracies.empty()) {
      throw Error(ErrorCode::kFixtureFormatError, "line " + std::to_string(line_no) + ": no accuracies");
    }
    row.average = optional_value(f[3], line_no);
    row.std = optional_value(f[4], line_no);
    row.ser = optional_value(f[5], line_no);
    row.line = line_no;
    rows.push_back(std::move(row));
  }
  return rows;
}

FixtureCheck verify_fixture_row(const FixtureRow& row) {
  FixtureCheck check;
  check.row = row;
  check.average = std::accumulate(row.accuracies.begin(), row.accuracies.end(), 0.0) /
                  static_cast<double>(row.accuracies.size());
  if (row.average) check.average_ok = hundredths(check.average) == hundredths(*row.average);
  if (row.std) {
    check.std = fairness_std(row.accuracies);
    check.std_ok = hundredths(*check.std) == hundredths(*row.std);
  }
  if (row.ser) {
    check.ser = ser(row.accuracies);
    check.ser_ok = !check.ser->degenerate && hundredths(check.ser->value) == hundredths(*row.ser);
  }
  return check;
}

}  // namespace fairkd
