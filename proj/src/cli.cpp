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

#include "fairkd/cli.hpp"

#include <functional>
#include <map>
#include <ostream>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"

#include "fairkd/checkpoint.hpp"
#include "fairkd/config.hpp"
#include "fairkd/evaluation.hpp"
#include "fairkd/feature_store.hpp"
#include "fairkd/io.hpp"
#include "fairkd/sampling.hpp"
#include "fairkd/synthdata.hpp"
#include "fairkd/training.hpp"

namespace fairkd {
namespace {

namespace fs = std::filesystem;
using Header = std::vector<std::pair<std::string, std::string>>;

struct ConfigOptions {
  std::optional<std::string> path;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", path, "RunConfig JSON (default: $FAIRKD_CONFIG_DIR/default.json)");
    cmd->add_option("--set", overrides, "Override a config key, e.g. --set train.epochs=3");
  }
  RunConfig load() const { return load_run_config(path, overrides); }
};

Header provenance(const RunConfig& cfg) { return {{"config_digest", cfg.digest()}, {"tool_version", kToolVersion}}; }

void append(Header& header, const Header& extra) { header.insert(header.end(), extra.begin(), extra.end()); }

DatasetManifest read_manifest(const fs::path& path) { return DatasetManifest::parse(read_file(path)); }

std::string store_of(const std::string& payload_ref) {
  const size_t hash = payload_ref.find('#');
  if (hash == std::string::npos || hash == 0) {
    throw Error(ErrorCode::kIoError, "payload_ref '" + payload_ref + "' is not of the form <store>#<sample_id>");
  }
  return payload_ref.substr(0, hash);
}

// Points every payload_ref of a manifest read from `from` at the same store
// when the manifest is written into `to`.
void rebase_payloads(DatasetManifest& manifest, const fs::path& from, const fs::path& to) {
  const fs::path to_abs = fs::absolute(to).lexically_normal();
  for (ManifestEntry& e : manifest.entries) {
    const std::string store = store_of(e.payload_ref);
    const fs::path target = fs::absolute(from / store).lexically_normal();
    e.payload_ref = target.lexically_relative(to_abs).generic_string() + e.payload_ref.substr(store.size());
  }
}

FeatureStore load_features(const DatasetManifest& manifest, const fs::path& manifest_dir) {
  FeatureStore all;
  std::set<std::string> seen;
  for (const ManifestEntry& e : manifest.entries) {
    const std::string store = store_of(e.payload_ref);
    if (seen.insert(store).second) all.merge(FeatureStore::parse(read_file(manifest_dir / store)));
  }
  for (const ManifestEntry& e : manifest.entries) all.at(e.sample_id);
  return all;
}

fs::path parent_of(const fs::path& p) {
  const fs::path parent = p.parent_path();
  return parent.empty() ? fs::path(".") : parent;
}

std::string widths(const std::vector<Index>& w) {
  std::string out = "mlp[";
  for (size_t i = 0; i < w.size(); ++i) out += (i ? "," : "") + std::to_string(w[i]);
  return out + "]";
}

std::string trace_csv(const std::vector<EpochRecord>& trace, const RunConfig& cfg) {
  std::string out = "#fairkd-trace 1\n";
  for (const auto& [k, v] : provenance(cfg)) out += "#" + k + "=" + v + "\n";
  out += "epoch,lr,total_loss,cls_loss,kd_loss\n";
  for (const EpochRecord& r : trace) {
    out += std::to_string(r.epoch) + "," + format_double(r.lr) + "," + format_double(r.total_loss) + "," +
           format_double(r.cls_loss) + "," + format_double(r.kd_loss) + "\n";
  }
  return out;
}

// ---- commands ---------------------------------------------------------------

int cmd_synth_gen(const ConfigOptions& opts, const std::optional<std::string>& out_dir, std::ostream& out) {
  const RunConfig cfg = opts.load();
  const fs::path dir = out_dir ? fs::path(*out_dir) : fs::path(cfg.paths.out_dir);
  const Universe universe = make_universe(resolved_universe(cfg));

  struct Artifact {
    std::string name;
    GeneratedDataset data;
  };
  std::vector<Artifact> artifacts;
  for (auto [stream, name] : {std::pair{IdentityStream::kRealTrain, "real_train"},
                              std::pair{IdentityStream::kSyntheticTrain, "synthetic_train"},
                              std::pair{IdentityStream::kEval, "eval"}}) {
    artifacts.push_back({name, generate_dataset(universe, stream, std::string(name) + ".features")});
  }
  PairProtocol protocol =
      gen_pair_protocol(artifacts.back().data.manifest, cfg.eval.pairs_per_group, seed_for(cfg.seed, SeedStream::kProtocol));
  protocol.header.emplace_back("features", "eval.features");
  append(protocol.header, provenance(cfg));

  // Everything is computed before the first write.
  for (Artifact& a : artifacts) {
    DatasetManifest& m = a.data.manifest;
    m.header = stats_header(manifest_stats(m), {});
    append(m.header, provenance(cfg));
    write_file_atomic(dir / (a.name + ".features"), a.data.features.serialize(provenance(cfg)));
    write_file_atomic(dir / (a.name + ".manifest"), m.serialize());
    const CellStats total = manifest_stats(m).total();
    out << "wrote " << (dir / (a.name + ".manifest")).string() << ": " << total.identities << " identities, "
        << total.images << " images\n";
  }
  write_file_atomic(dir / "eval.protocol", protocol.serialize());
  out << "wrote " << (dir / "eval.protocol").string() << ": " << protocol.groups.size() << " groups x "
      << cfg.eval.pairs_per_group << " pairs\n";
  return kExitOk;
}

void report_shortfalls(const MergeResult& result, std::ostream& err) {
  for (const Shortfall& s : result.shortfalls) {
    err << "shortfall: group " << group_name(s.group) << " " << SourceName(s.source) << " requested "
        << s.requested << ", available " << s.available << "\n";
  }
}

std::vector<DatasetManifest> read_rebased(const std::vector<std::string>& paths, const fs::path& out_dir) {
  std::vector<DatasetManifest> out;
  for (const std::string& p : paths) {
    DatasetManifest m = read_manifest(p);
    rebase_payloads(m, parent_of(p), out_dir);
    out.push_back(std::move(m));
  }
  return out;
}

int cmd_merge(const ConfigOptions& opts, const std::vector<std::string>& inputs, Index total, const std::string& output,
              std::ostream& out, std::ostream& err) {
  const RunConfig cfg = opts.load();
  const std::vector<DatasetManifest> manifests = read_rebased(inputs, parent_of(output));
  MergeResult result = balanced_merge(manifests, total);
  append(result.manifest.header, provenance(cfg));
  write_file_atomic(output, result.manifest.serialize());
  report_shortfalls(result, err);
  out << "wrote " << output << ": " << manifest_stats(result.manifest).total().identities << " identities\n";
  return kExitOk;
}

int cmd_mix(const ConfigOptions& opts, const std::vector<std::string>& real, const std::vector<std::string>& synthetic,
            double fraction, Index total, const std::string& output, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = opts.load();
  const std::vector<DatasetManifest> r = read_rebased(real, parent_of(output));
  const std::vector<DatasetManifest> s = read_rebased(synthetic, parent_of(output));
  MergeResult result = mix_merge(r, s, fraction, total);
  result.manifest.header.emplace_back("real_fraction", format_double(fraction));
  append(result.manifest.header, provenance(cfg));
  write_file_atomic(output, result.manifest.serialize());
  report_shortfalls(result, err);
  const ManifestStats stats = manifest_stats(result.manifest);
  out << "wrote " << output << ": " << stats.total().identities << " identities, real share "
      << format_double(stats.real_identity_share()) << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string manifest;
  std::string output;
  std::optional<std::string> trace;
  std::string role = "student";
  std::optional<std::string> teacher;
};

int cmd_train(const ConfigOptions& opts, const TrainArgs& args, bool distillation, std::ostream& out) {
  if (distillation && !args.teacher) {
    throw Error(ErrorCode::kConfigError, "'--teacher': distill requires a teacher checkpoint");
  }
  if (args.role != "student" && args.role != "teacher") {
    throw Error(ErrorCode::kConfigError, "'--role': expected 'student' or 'teacher'");
  }
  const RunConfig cfg = opts.load();
  const bool as_teacher = !distillation && args.role == "teacher";
  const EncoderSpec spec = resolved_encoder(cfg, as_teacher);
  const TrainConfig train = resolved_train(cfg);
  std::optional<Checkpoint> teacher;
  if (distillation) teacher = checkpoint_load(*args.teacher, spec.embedding_dim);

  const DatasetManifest manifest = read_manifest(args.manifest);
  const FeatureStore store = load_features(manifest, parent_of(args.manifest));
  const TrainingSet data = make_training_set(manifest, store);

  const TrainedModel model = distillation ? distill(teacher->encoder, spec, data, cfg.loss, train)
                                          : train_from_scratch(spec, data, cfg.loss, train);
  Checkpoint ckpt = make_checkpoint(model, cfg.digest(), as_teacher ? "teacher" : "student");
  nlohmann::ordered_json meta = {{"model_id", widths(spec.hidden_widths)},
                                 {"data_id", manifest.name},
                                 {"distillation", distillation ? "kd" : "none"},
                                 {"loss_kind", std::string(MarginKindName(cfg.loss.margin.kind))}};
  if (distillation) meta["teacher_digest"] = teacher->encoder.digest();
  ckpt.metadata_json = meta.dump();

  const std::string trace_path = args.trace ? *args.trace : args.output + ".trace.csv";
  const std::string trace = trace_csv(model.trace, cfg);
  checkpoint_save(ckpt, args.output);
  write_file_atomic(trace_path, trace);
  out << "wrote " << args.output << " and " << trace_path << " (" << model.trace.size() << " epochs";
  if (!model.trace.empty()) out << ", final loss " << format_double(model.trace.back().total_loss);
  out << ")\n";
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string protocol;
  std::optional<std::string> features;
  std::string output;
  std::optional<std::string> table;
  std::optional<std::string> model_id;
  std::optional<std::string> data_id;
  std::optional<std::string> distillation;
};

int cmd_eval(const ConfigOptions& opts, const EvalArgs& args, std::ostream& out) {
  const RunConfig cfg = opts.load();
  const Checkpoint ckpt = checkpoint_load(args.checkpoint);
  const PairProtocol protocol = PairProtocol::parse(read_file(args.protocol));
  fs::path features_path;
  if (args.features) {
    features_path = *args.features;
  } else {
    for (const auto& [k, v] : protocol.header) {
      if (k == "features") features_path = parent_of(args.protocol) / v;
    }
    if (features_path.empty()) {
      throw Error(ErrorCode::kConfigError, "'--features': protocol names no feature store; pass --features");
    }
  }
  const FeatureStore store = FeatureStore::parse(read_file(features_path));

  std::vector<std::string> names;
  std::vector<double> accuracies;
  for (const GroupProtocol& g : protocol.groups) {
    const std::vector<ScoredPair> scored = score_pairs(ckpt.encoder, g, store);
    names.push_back(g.name);
    accuracies.push_back(kfold_verification_accuracy(scored, cfg.eval.k_folds, seed_for(cfg.seed, SeedStream::kFolds)));
  }

  ReportMetadata meta;
  const nlohmann::json stored = nlohmann::json::parse(ckpt.metadata_json, nullptr, false);
  auto field = [&](const char* key) {
    return stored.is_object() && stored.contains(key) && stored[key].is_string() ? stored[key].get<std::string>()
                                                                                 : std::string();
  };
  meta.model_id = args.model_id.value_or(field("model_id"));
  meta.data_id = args.data_id.value_or(field("data_id"));
  meta.distillation = args.distillation.value_or(field("distillation"));
  meta.loss_kind = field("loss_kind");
  EvalReport report = build_report(std::move(names), std::move(accuracies), std::move(meta));
  report.config_digest = cfg.digest();

  const std::string table = render_table(std::span(&report, 1), TableFormat::kMarkdown);
  write_file_atomic(args.output, report.to_json());
  if (args.table) write_file_atomic(*args.table, table);
  out << table;
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& format, const std::optional<std::string>& output,
               std::ostream& out) {
  if (format != "markdown" && format != "csv") throw Error(ErrorCode::kConfigError, "'--format': expected markdown or csv");
  std::vector<EvalReport> reports;
  for (const std::string& p : inputs) reports.push_back(EvalReport::from_json(read_file(p)));
  const std::string table = render_table(reports, format == "csv" ? TableFormat::kCsv : TableFormat::kMarkdown);
  if (output) {
    write_file_atomic(*output, table);
  } else {
    out << table;
  }
  return kExitOk;
}

std::string printed_vs(const std::optional<double>& printed, const std::string& recomputed) {
  return printed ? format_2dp(*printed) + "/" + recomputed : "-";
}

int cmd_verify_tables(const std::string& fixture, std::ostream& out) {
  const std::vector<FixtureRow> rows = parse_fixture(read_file(fixture));
  if (rows.empty()) throw Error(ErrorCode::kFixtureFormatError, "fixture has no rows");
  int failed = 0;
  out << "| Result | Table | Row | Average (printed/recomputed) | STD | SER | Deltas |\n";
  out << "|---|---|---|---|---|---|---|\n";
  for (const FixtureRow& row : rows) {
    const FixtureCheck c = verify_fixture_row(row);
    std::string ser_text = "-";
    if (c.ser) ser_text = c.ser->degenerate ? "inf" : format_2dp(c.ser->value);
    std::string deltas;
    auto delta = [&](const char* name, bool ok, const std::optional<double>& printed, double recomputed) {
      if (ok || !printed) return;
      char buf[96];
      std::snprintf(buf, sizeof(buf), "%s%s %+.4f", deltas.empty() ? "" : "; ", name, recomputed - *printed);
      deltas += buf;
    };
    delta("average", c.average_ok, row.average, c.average);
    if (c.std) delta("std", c.std_ok, row.std, *c.std);
    if (c.ser) delta("ser", c.ser_ok, row.ser, c.ser->value);
    if (!c.pass()) ++failed;
    out << "| " << (c.pass() ? "PASS" : "FAIL") << " | " << row.table << " | " << row.label << " | "
        << printed_vs(row.average, format_2dp(c.average)) << " | "
        << printed_vs(row.std, c.std ? format_2dp(*c.std) : "-") << " | " << printed_vs(row.ser, ser_text) << " | "
        << (deltas.empty() ? "-" : deltas) << " |\n";
  }
  out << (rows.size() - failed) << "/" << rows.size() << " rows pass\n";
  return failed == 0 ? kExitOk : kExitDomainError;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knowledge-distillation fairness toolkit on a toy face universe", "fairkd"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);
  std::function<int()> action;

  ConfigOptions gen_cfg;
  std::optional<std::string> gen_out;
  CLI::App* gen = app.add_subcommand("synth-gen", "Generate real/synthetic/eval manifests, features and a pair protocol");
  gen_cfg.attach(gen);
  gen->add_option("--out", gen_out, "Output directory (default: paths.out_dir)");
  gen->callback([&] { action = [&] { return cmd_synth_gen(gen_cfg, gen_out, out); }; });

  ConfigOptions merge_cfg;
  std::vector<std::string> merge_inputs;
  Index merge_total = 0;
  std::string merge_out;
  CLI::App* merge = app.add_subcommand("merge", "Group-balanced merge of manifests");
  merge_cfg.attach(merge);
  merge->add_option("inputs", merge_inputs, "Input manifests")->required();
  merge->add_option("--total", merge_total, "Identities to keep")->required();
  merge->add_option("--out", merge_out, "Output manifest")->required();
  merge->callback([&] { action = [&] { return cmd_merge(merge_cfg, merge_inputs, merge_total, merge_out, out, err); }; });

  ConfigOptions mix_cfg;
  std::vector<std::string> mix_real, mix_synth;
  double mix_fraction = 0.7;
  Index mix_total = 0;
  std::string mix_out;
  CLI::App* mix = app.add_subcommand("mix", "Balanced merge with a real/synthetic split per group");
  mix_cfg.attach(mix);
  mix->add_option("--real", mix_real, "Real manifests")->required();
  mix->add_option("--synthetic", mix_synth, "Synthetic manifests")->required();
  mix->add_option("--fraction", mix_fraction, "Real identity fraction")->check(CLI::Range(0.0, 1.0));
  mix->add_option("--total", mix_total, "Identities to keep")->required();
  mix->add_option("--out", mix_out, "Output manifest")->required();
  mix->callback([&] {
    action = [&] { return cmd_mix(mix_cfg, mix_real, mix_synth, mix_fraction, mix_total, mix_out, out, err); };
  });

  ConfigOptions train_cfg;
  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Train an encoder from scratch");
  train_cfg.attach(train);
  train->add_option("--manifest", train_args.manifest, "Training manifest")->required();
  train->add_option("--out", train_args.output, "Checkpoint path")->required();
  train->add_option("--trace", train_args.trace, "Trace CSV (default: <out>.trace.csv)");
  train->add_option("--role", train_args.role, "teacher or student (selects the encoder spec)");
  train->callback([&] { action = [&] { return cmd_train(train_cfg, train_args, false, out); }; });

  ConfigOptions distill_cfg;
  TrainArgs distill_args;
  CLI::App* dist = app.add_subcommand("distill", "Train a student under a frozen teacher");
  distill_cfg.attach(dist);
  dist->add_option("--manifest", distill_args.manifest, "Training manifest")->required();
  dist->add_option("--teacher", distill_args.teacher, "Teacher checkpoint");
  dist->add_option("--out", distill_args.output, "Checkpoint path")->required();
  dist->add_option("--trace", distill_args.trace, "Trace CSV (default: <out>.trace.csv)");
  dist->callback([&] { action = [&] { return cmd_train(distill_cfg, distill_args, true, out); }; });

  ConfigOptions eval_cfg;
  EvalArgs eval_args;
  CLI::App* ev = app.add_subcommand("eval", "Per-group verification accuracy and fairness report");
  eval_cfg.attach(ev);
  ev->add_option("--checkpoint", eval_args.checkpoint, "Encoder checkpoint")->required();
  ev->add_option("--protocol", eval_args.protocol, "Pair protocol")->required();
  ev->add_option("--features", eval_args.features, "Feature store (default: named in the protocol header)");
  ev->add_option("--out", eval_args.output, "Report JSON")->required();
  ev->add_option("--table", eval_args.table, "Also write the markdown table here");
  ev->add_option("--model-id", eval_args.model_id, "Model column");
  ev->add_option("--data-id", eval_args.data_id, "Data column");
  ev->add_option("--distillation", eval_args.distillation, "Distillation column");
  ev->callback([&] { action = [&] { return cmd_eval(eval_cfg, eval_args, out); }; });

  std::vector<std::string> report_inputs;
  std::string report_format = "markdown";
  std::optional<std::string> report_out;
  CLI::App* rep = app.add_subcommand("report", "Render reports as one table");
  rep->add_option("reports", report_inputs, "Report JSON files")->required();
  rep->add_option("--format", report_format, "markdown or csv");
  rep->add_option("--out", report_out, "Output file (default: stdout)");
  rep->callback([&] { action = [&] { return cmd_report(report_inputs, report_format, report_out, out); }; });

  std::string fixture;
  CLI::App* vt = app.add_subcommand("verify-tables", "Recompute Average/STD/SER of transcribed table rows");
  vt->add_option("fixture", fixture, "Fixture file")->required();
  vt->callback([&] { action = [&] { return cmd_verify_tables(fixture, out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsageError;
  }

  try {
    return action ? action() : kExitUsageError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::kConfigError ? kExitUsageError : kExitDomainError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomainError;
  }
}

}  // namespace fairkd
