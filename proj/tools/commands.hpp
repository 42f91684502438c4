// Copyright 2026 The vflr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Subcommands of the vflr tool: keygen, train, attack, bench.
// Exit codes: 0 ok, 2 configuration, 3 protocol, 4 ingestion/parse.

#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "vflr/vflr.hpp"
#include "vflr/experiment.hpp"

namespace vflr::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitProtocol = 3;
inline constexpr int kExitIngestion = 4;

// ---------------------------------------------------------------------------
// Small file helpers

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
  if (!out) throw ConfigError("write failed: " + path);
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline std::string matrix_csv(const std::vector<std::string>& names, const DenseMatrix& x) {
  std::ostringstream out;
  out << std::setprecision(17);
  for (std::size_t c = 0; c < x.cols(); ++c) {
    if (c) out << ',';
    out << (c < names.size() ? names[c] : "x" + std::to_string(c));
  }
  out << '\n';
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
      if (c) out << ',';
      out << x(r, c);
    }
    out << '\n';
  }
  return out.str();
}

// Numeric CSV with a header row.
inline DenseMatrix parse_matrix_csv(const std::string& text, const std::string& what) {
  const auto records = data::detail::parse_records(text);
  if (records.empty()) throw IngestionError(what + ": empty file");
  const std::size_t cols = records[0].size();
  std::vector<double> values;
  std::size_t rows = 0;
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() == 1 && data::detail::trim(records[r][0]).empty()) continue;
    if (records[r].size() != cols) {
      throw IngestionError(what + ": row " + std::to_string(r + 1) + " has " + std::to_string(records[r].size()) +
                           " fields, expected " + std::to_string(cols));
    }
    for (std::size_t c = 0; c < cols; ++c) {
      const auto v = data::detail::parse_double(data::detail::trim(records[r][c]));
      if (!v) throw IngestionError(what + ": row " + std::to_string(r + 1) + " column " + std::to_string(c + 1) +
                                   " is not a number");
      values.push_back(*v);
    }
    ++rows;
  }
  return DenseMatrix(rows, cols, std::move(values));
}

inline data::Labels parse_labels_csv(const std::string& text, const std::string& what) {
  const DenseMatrix m = parse_matrix_csv(text, what);
  if (m.cols() != 1) throw IngestionError(what + ": expected a single label column");
  data::Labels y(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (m(i, 0) != 0.0 && m(i, 0) != 1.0) {
      throw IngestionError(what + ": row " + std::to_string(i + 2) + " is not a 0/1 label");
    }
    y[i] = m(i, 0) == 1.0 ? 1 : 0;
  }
  return y;
}

inline std::string labels_csv(const data::Labels& y) {
  std::string out = "label\n";
  for (auto v : y) out += v ? "1\n" : "0\n";
  return out;
}

// ---------------------------------------------------------------------------
// keygen

struct KeygenOptions {
  std::size_t bits = 2048;
  std::string out;
  bool force = false;
  std::optional<std::uint64_t> seed;
};

inline int cmd_keygen(const KeygenOptions& o, std::ostream& log) {
  if (!paillier::supported_key_bits(o.bits)) {
    throw ConfigError("unsupported key length " + std::to_string(o.bits) + " (expected 512, 1024 or 2048)");
  }
  if (o.out.empty()) throw ConfigError("--out is required");
  const std::string pub = o.out + ".pub";
  const std::string key = o.out + ".key";
  if (!o.force) {
    for (const auto& p : {pub, key}) {
      if (std::filesystem::exists(p)) throw ConfigError(p + " exists; pass --force to overwrite");
    }
  }
  std::uint64_t seed = 0;
  if (o.seed) {
    seed = *o.seed;
  } else {
    std::random_device rd;
    seed = (std::uint64_t{rd()} << 32) ^ rd();
  }
  RngStream rng = derive_stream(seed, PartyId::kBob, StreamPurpose::kKeygen);
  const auto kp = paillier::keygen(o.bits, rng);
  write_file_bytes(pub, paillier::serialize_public_key(kp.pub));
  write_file_bytes(key, paillier::serialize_private_key(kp));
  log << "wrote " << pub << " and " << key << " (" << kp.pub.bits() << "-bit modulus)\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  experiment::DatasetOptions dataset;
  std::string defense = "none";
  std::optional<double> epsilon;
  std::optional<double> b1;
  std::optional<double> b2;
  std::optional<double> mult_location;
  bool strict_clip = false;
  std::optional<double> q;
  std::optional<std::size_t> s_size;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> key_bits;
  std::size_t d_alice = experiment::kAllFeatures;
  std::size_t epochs = 30;
  double lr = 0.1;
  double lambda = 0.0;
  std::uint64_t seed = 1;
  bool forwarded_denominator = false;
  bool socket = false;
  bool timings = false;
  bool attack = false;
  std::string report;
  std::string transcript;
  std::string dump_alice_features;
  std::string dump_labels;
};

inline TrainConfig build_config(const TrainOptions& o) {
  const DefenseKind kind = parse_defense_kind(o.defense);
  auto reject = [&](bool given, const char* flag, const char* allowed) {
    if (given) throw ConfigError(std::string(flag) + " only applies to " + allowed + " (got --defense " + o.defense + ")");
  };
  reject(o.epsilon && kind == DefenseKind::kNone, "--epsilon", "add, mult or hybrid");
  reject((o.b1 || o.b2) && kind != DefenseKind::kMult, o.b1 ? "--b1" : "--b2", "mult");
  reject((o.mult_location || o.strict_clip) && kind != DefenseKind::kMult,
         o.mult_location ? "--mult-noise-mean" : "--unsigned-clip", "mult");
  reject((o.q || o.s_size) && kind != DefenseKind::kHybrid, o.q ? "--q" : "--s-size", "hybrid");
  reject(o.forwarded_denominator && kind != DefenseKind::kHybrid, "--forwarded-denominator", "hybrid");
  reject(o.batch_size && kind == DefenseKind::kHybrid, "--batch-size", "none, add or mult (hybrid batches are q * |S|)");
  reject(o.key_bits && (kind == DefenseKind::kAdd || kind == DefenseKind::kMult), "--key-bits", "none or hybrid");

  TrainConfig cfg;
  cfg.learning_rate = o.lr;
  cfg.epochs = o.epochs;
  cfg.lambda = o.lambda;
  cfg.seed = o.seed;
  if (o.batch_size) cfg.batch_size = *o.batch_size;
  if (o.key_bits) cfg.key_bits = *o.key_bits;
  cfg.normalize_by_k = !o.forwarded_denominator;
  cfg.transport = o.socket ? TransportKind::kSocket : TransportKind::kInProcess;
  cfg.defense.kind = kind;
  switch (kind) {
    case DefenseKind::kAdd:
      if (o.epsilon) cfg.defense.add.epsilon = *o.epsilon;
      break;
    case DefenseKind::kMult:
      if (o.epsilon) cfg.defense.mult.epsilon = *o.epsilon;
      if (o.b1) cfg.defense.mult.b1 = *o.b1;
      if (o.b2) cfg.defense.mult.b2 = *o.b2;
      if (o.mult_location) cfg.defense.mult.noise_location = *o.mult_location;
      cfg.defense.mult.unsigned_clip = o.strict_clip;
      break;
    case DefenseKind::kHybrid:
      if (o.epsilon) cfg.defense.hybrid.epsilon = *o.epsilon;
      if (o.q) cfg.defense.hybrid.q = *o.q;
      if (o.s_size) cfg.defense.hybrid.s_size = *o.s_size;
      break;
    case DefenseKind::kNone: break;
  }
  return cfg;
}

inline int cmd_train(const TrainOptions& o, std::ostream& log) {
  const TrainConfig cfg = build_config(o);
  const auto prepared = experiment::prepare(o.dataset, o.d_alice, o.seed);
  auto result = protocol::train(prepared.train, cfg, &prepared.test);
  if (o.attack) {
    const auto atk = attack::attack_transcript(result.transcript, prepared.train.alice, &prepared.train.labels);
    result.report.attack_success = atk.success_rate;
  }
  const std::string text = dump_report(result.report, o.timings);
  if (o.report.empty()) {
    log << text;
  } else {
    write_text(o.report, text);
  }
  if (!o.transcript.empty()) write_file_bytes(o.transcript, wire::serialize_transcript(result.transcript));
  if (!o.dump_alice_features.empty()) {
    write_text(o.dump_alice_features, matrix_csv(prepared.train.alice_features, prepared.train.alice));
  }
  if (!o.dump_labels.empty()) write_text(o.dump_labels, labels_csv(prepared.train.labels));
  if (!o.report.empty()) {
    const auto& m = result.report.final_metrics;
    log << result.report.protocol << ": " << result.report.rounds << " rounds, test accuracy " << m.accuracy
        << ", auc " << m.auc << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// attack

struct AttackOptions {
  std::string transcript;
  std::string alice_features;
  std::string labels;
  std::string report;
};

inline int cmd_attack(const AttackOptions& o, std::ostream& log) {
  const auto transcript = wire::parse_transcript(read_file_bytes(o.transcript));
  const DenseMatrix x = parse_matrix_csv(read_text(o.alice_features), o.alice_features);
  std::optional<data::Labels> labels;
  if (!o.labels.empty()) labels = parse_labels_csv(read_text(o.labels), o.labels);
  const auto report = attack::attack_transcript(transcript, x, labels ? &*labels : nullptr);
  const std::string text = attack::to_json(report).dump(2) + "\n";
  if (o.report.empty()) {
    log << text;
  } else {
    write_text(o.report, text);
    log << "attack: " << report.recoverable_rounds << "/" << report.rounds.size() << " rounds recoverable";
    if (report.success_rate) log << ", success rate " << *report.success_rate;
    log << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// bench

struct BenchOptions {
  experiment::DatasetOptions dataset;
  std::string defenses = "none,hybrid,add,mult";
  std::size_t seeds = 3;
  std::uint64_t base_seed = 1;
  std::size_t epochs = 30;
  std::size_t d_alice = experiment::kAllFeatures;
  std::size_t key_bits = 2048;
  std::size_t batch_size = 16;
  double lr = 0.1;
  double add_epsilon = 1.0;
  double mult_epsilon = 10.0;
  double mult_location = 0.0;
  HybridParams hybrid;
  std::string out;
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;
};

inline Summary summarize(const std::vector<double>& v) {
  Summary s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

struct BenchRow {
  std::string defense;
  std::size_t runs = 0;
  Summary accuracy, auc, total_s, crypto_s, channel_s;
  std::optional<double> ratio_to_baseline;  // mean total time / baseline mean total time
};

struct BenchResult {
  std::vector<std::uint64_t> seeds;
  std::vector<BenchRow> rows;
  std::optional<double> hybrid_baseline_ratio;
};

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = data::detail::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline BenchResult run_bench(const BenchOptions& o) {
  if (o.seeds == 0) throw ConfigError("--seeds must be at least 1");
  BenchResult result;
  for (std::size_t i = 0; i < o.seeds; ++i) result.seeds.push_back(o.base_seed + i);
  const auto names = split_list(o.defenses);
  if (names.empty()) throw ConfigError("--defenses is empty");
  for (const auto& name : names) {
    TrainConfig cfg;
    cfg.learning_rate = o.lr;
    cfg.epochs = o.epochs;
    cfg.batch_size = o.batch_size;
    cfg.key_bits = o.key_bits;
    cfg.defense.kind = parse_defense_kind(name);
    cfg.defense.add.epsilon = o.add_epsilon;
    cfg.defense.mult.epsilon = o.mult_epsilon;
    cfg.defense.mult.noise_location = o.mult_location;
    cfg.defense.hybrid = o.hybrid;
    std::vector<double> acc, auc, total, crypto, channel;
    for (auto seed : result.seeds) {
      cfg.seed = seed;
      const auto prepared = experiment::prepare(o.dataset, o.d_alice, seed);
      const auto run = protocol::train(prepared.train, cfg, &prepared.test);
      acc.push_back(run.report.final_metrics.accuracy);
      auc.push_back(run.report.final_metrics.auc);
      total.push_back(run.report.timings.total_s);
      crypto.push_back(run.report.timings.crypto_s);
      channel.push_back(run.report.timings.channel_s);
    }
    BenchRow row{protocol_name(cfg.defense.kind), result.seeds.size(), summarize(acc), summarize(auc),
                 summarize(total), summarize(crypto), summarize(channel), std::nullopt};
    result.rows.push_back(row);
  }
  const BenchRow* baseline = nullptr;
  const BenchRow* hybrid = nullptr;
  for (const auto& row : result.rows) {
    if (row.defense == "baseline") baseline = &row;
    if (row.defense == "hybrid") hybrid = &row;
  }
  if (baseline && baseline->total_s.mean > 0.0) {
    for (auto& row : result.rows) row.ratio_to_baseline = row.total_s.mean / baseline->total_s.mean;
    if (hybrid) result.hybrid_baseline_ratio = hybrid->total_s.mean / baseline->total_s.mean;
  }
  return result;
}

inline nlohmann::ordered_json to_json(const BenchResult& r, const std::string& dataset) {
  auto summary = [](const Summary& s) { return nlohmann::ordered_json{{"mean", s.mean}, {"std", s.std}}; };
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& row : r.rows) {
    nlohmann::ordered_json j{{"defense", row.defense},
                             {"runs", row.runs},
                             {"accuracy", summary(row.accuracy)},
                             {"auc", summary(row.auc)},
                             {"total_s", summary(row.total_s)},
                             {"crypto_s", summary(row.crypto_s)},
                             {"channel_s", summary(row.channel_s)},
                             {"ratio_to_baseline", nullptr}};
    if (row.ratio_to_baseline) j["ratio_to_baseline"] = *row.ratio_to_baseline;
    rows.push_back(j);
  }
  nlohmann::ordered_json j{{"schema_version", 1}, {"kind", "bench"},  {"dataset", dataset},
                           {"seeds", r.seeds},    {"rows", rows},     {"hybrid_baseline_ratio", nullptr}};
  if (r.hybrid_baseline_ratio) j["hybrid_baseline_ratio"] = *r.hybrid_baseline_ratio;
  return j;
}

inline std::string bench_table(const BenchResult& r) {
  std::ostringstream out;
  out << std::fixed;
  out << std::left << std::setw(10) << "defense" << std::right << std::setw(18) << "accuracy" << std::setw(18)
      << "auc" << std::setw(20) << "total_s" << std::setw(20) << "crypto_s" << std::setw(10) << "ratio" << "\n";
  auto cell = [&](const Summary& s, int prec, int width) {
    std::ostringstream c;
    c << std::fixed << std::setprecision(prec) << s.mean << " +- " << s.std;
    out << std::setw(width) << c.str();
  };
  for (const auto& row : r.rows) {
    out << std::left << std::setw(10) << row.defense << std::right;
    cell(row.accuracy, 4, 18);
    cell(row.auc, 4, 18);
    cell(row.total_s, 3, 20);
    cell(row.crypto_s, 3, 20);
    out << std::setw(10) << std::setprecision(3);
    if (row.ratio_to_baseline) {
      out << *row.ratio_to_baseline;
    } else {
      out << "-";
    }
    out << "\n";
  }
  if (r.hybrid_baseline_ratio) out << "hybrid/baseline time ratio: " << std::setprecision(3) << *r.hybrid_baseline_ratio << "\n";
  return out.str();
}

inline int cmd_bench(const BenchOptions& o, std::ostream& log) {
  const auto result = run_bench(o);
  log << bench_table(result);
  if (!o.out.empty()) write_text(o.out, to_json(result, o.dataset.source).dump(2) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Entry point

inline void add_dataset_options(CLI::App* cmd, experiment::DatasetOptions& d) {
  cmd->add_option("--dataset", d.source, "CSV path, or synth:n=..,d=..,sep=..,seed=..")->required();
  cmd->add_option("--label-column", d.label_column, "label column name or index (default: last)");
  cmd->add_option("--test-fraction", d.test_fraction, "held-out fraction")->capture_default_str();
  cmd->add_flag("!--no-header", d.has_header, "the CSV has no header row");
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Vertical federated logistic regression with label-leakage defenses"};
  app.require_subcommand(1);

  KeygenOptions keygen;
  auto* keygen_cmd = app.add_subcommand("keygen", "generate a Paillier key pair");
  keygen_cmd->add_option("--bits", keygen.bits, "modulus size: 512, 1024 or 2048")->capture_default_str();
  keygen_cmd->add_option("--out", keygen.out, "output prefix; writes <out>.pub and <out>.key")->required();
  keygen_cmd->add_flag("--force", keygen.force, "overwrite existing key files");
  keygen_cmd->add_option("--seed", keygen.seed, "deterministic key generation");

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "train with one protocol and write a report");
  add_dataset_options(train_cmd, train.dataset);
  train_cmd->add_option("--defense", train.defense, "none | add | mult | hybrid")->capture_default_str();
  train_cmd->add_option("--epsilon", train.epsilon, "privacy budget of the defense");
  train_cmd->add_option("--b1", train.b1, "mult: lower clipping bound");
  train_cmd->add_option("--b2", train.b2, "mult: upper clipping bound");
  train_cmd->add_option("--mult-noise-mean", train.mult_location, "mult: location of the Laplace factor (default 0)");
  train_cmd->add_flag("--unsigned-clip", train.strict_clip, "mult: clip to the unsigned bounds as literally written");
  train_cmd->add_option("--q", train.q, "hybrid: intended fraction of |S|");
  train_cmd->add_option("--s-size", train.s_size, "hybrid: announced subset size |S|");
  train_cmd->add_option("--batch-size", train.batch_size, "mini-batch size (default 16)");
  train_cmd->add_option("--d-alice", train.d_alice, "features held by the passive party (default: all)");
  train_cmd->add_option("--epochs", train.epochs)->capture_default_str();
  train_cmd->add_option("--lr", train.lr)->capture_default_str();
  train_cmd->add_option("--lambda", train.lambda, "L2 penalty")->capture_default_str();
  train_cmd->add_option("--seed", train.seed)->capture_default_str();
  train_cmd->add_option("--key-bits", train.key_bits, "Paillier modulus size (default 2048)");
  train_cmd->add_flag("--forwarded-denominator", train.forwarded_denominator,
                      "hybrid: divide by the forwarded count instead of the live count");
  train_cmd->add_flag("--socket", train.socket, "run the parties over a socket pair");
  train_cmd->add_flag("--timings", train.timings, "include wall-clock timings in the report");
  train_cmd->add_flag("--attack", train.attack, "run the label attack on the transcript");
  train_cmd->add_option("--report", train.report, "report path (default: stdout)");
  train_cmd->add_option("--transcript", train.transcript, "transcript output path");
  train_cmd->add_option("--dump-alice-features", train.dump_alice_features,
                        "write the passive party's training features as CSV");
  train_cmd->add_option("--dump-labels", train.dump_labels, "write the training labels as CSV");

  AttackOptions attack_opts;
  auto* attack_cmd = app.add_subcommand("attack", "infer labels from a transcript");
  attack_cmd->add_option("--transcript", attack_opts.transcript)->required();
  attack_cmd->add_option("--alice-features", attack_opts.alice_features)->required();
  attack_cmd->add_option("--labels", attack_opts.labels, "ground truth, enables the success rate");
  attack_cmd->add_option("--report", attack_opts.report, "report path (default: stdout)");

  BenchOptions bench;
  std::optional<std::size_t> bench_s_size;
  auto* bench_cmd = app.add_subcommand("bench", "compare defenses over several seeds");
  add_dataset_options(bench_cmd, bench.dataset);
  bench_cmd->add_option("--defenses", bench.defenses)->capture_default_str();
  bench_cmd->add_option("--seeds", bench.seeds, "number of seeds")->capture_default_str();
  bench_cmd->add_option("--base-seed", bench.base_seed)->capture_default_str();
  bench_cmd->add_option("--epochs", bench.epochs)->capture_default_str();
  bench_cmd->add_option("--d-alice", bench.d_alice);
  bench_cmd->add_option("--key-bits", bench.key_bits)->capture_default_str();
  bench_cmd->add_option("--batch-size", bench.batch_size)->capture_default_str();
  bench_cmd->add_option("--add-epsilon", bench.add_epsilon)->capture_default_str();
  bench_cmd->add_option("--mult-epsilon", bench.mult_epsilon)->capture_default_str();
  bench_cmd->add_option("--mult-noise-mean", bench.mult_location)->capture_default_str();
  bench_cmd->add_option("--s-size", bench_s_size);
  bench_cmd->add_option("--out", bench.out, "JSON output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*keygen_cmd) return cmd_keygen(keygen, out);
    if (*train_cmd) return cmd_train(train, out);
    if (*attack_cmd) return cmd_attack(attack_opts, out);
    if (*bench_cmd) {
      if (bench_s_size) bench.hybrid.s_size = *bench_s_size;
      return cmd_bench(bench, out);
    }
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ProtocolError& e) {
    err << "protocol error: " << e.what() << "\n";
    return kExitProtocol;
  } catch (const IngestionError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitIngestion;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace vflr::cli
