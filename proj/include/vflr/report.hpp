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

// Training report and its JSON form. Timings are only written when asked
// for, so two runs with the same seed produce byte-identical reports.

#pragma once

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

#include "vflr/config.hpp"
#include "vflr/errors.hpp"
#include "vflr/numeric.hpp"

namespace vflr {

struct Timings {
  double total_s = 0.0;    // wall clock
  double crypto_s = 0.0;   // keygen, encrypt, decrypt, homomorphic ops (CPU, both parties)
  double channel_s = 0.0;  // frame encode/decode and transport writes (CPU, both parties)
  friend bool operator==(const Timings&, const Timings&) = default;
};

struct TrainReport {
  static constexpr int kSchemaVersion = 1;

  std::string protocol;  // centralized | baseline | add | mult | hybrid
  TrainConfig config;
  std::size_t rounds = 0;
  std::vector<double> per_epoch_loss;
  Metrics final_metrics;
  std::optional<double> attack_success;
  Timings timings;
  std::optional<double> mean_forwarded;  // hybrid: average L_RR per round
};

inline const char* protocol_name(DefenseKind kind) {
  switch (kind) {
    case DefenseKind::kNone: return "baseline";
    case DefenseKind::kAdd: return "add";
    case DefenseKind::kMult: return "mult";
    case DefenseKind::kHybrid: return "hybrid";
  }
  return "?";
}

using Json = nlohmann::ordered_json;

inline Json config_to_json(const TrainConfig& c) {
  const auto& d = c.defense;
  Json hybrid = {{"epsilon", d.hybrid.epsilon},
                 {"q", d.hybrid.q},
                 {"s_size", d.hybrid.s_size},
                 {"enforce_feasibility", d.hybrid.enforce_feasibility},
                 {"keep_probability", nullptr}};
  if (d.hybrid.keep_probability) hybrid["keep_probability"] = *d.hybrid.keep_probability;
  return Json{{"learning_rate", c.learning_rate},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"lambda", c.lambda},
              {"seed", c.seed},
              {"key_bits", c.key_bits},
              {"normalize_by_k", c.normalize_by_k},
              {"fixed_point_scale", c.fixed_point_scale},
              {"transport", c.transport == TransportKind::kSocket ? "socket" : "inprocess"},
              {"max_redraws", c.max_redraws},
              {"defense",
               {{"kind", to_string(d.kind)},
                {"add", {{"epsilon", d.add.epsilon}}},
                {"mult",
                 {{"epsilon", d.mult.epsilon},
                  {"b1", d.mult.b1},
                  {"b2", d.mult.b2},
                  {"unsigned_clip", d.mult.unsigned_clip},
                  {"noise_location", d.mult.noise_location}}},
                {"hybrid", hybrid}}}};
}

inline TrainConfig config_from_json(const Json& j) {
  TrainConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.lambda = j.at("lambda").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.key_bits = j.at("key_bits").get<std::size_t>();
  c.normalize_by_k = j.at("normalize_by_k").get<bool>();
  c.fixed_point_scale = j.at("fixed_point_scale").get<std::int64_t>();
  c.transport = j.at("transport").get<std::string>() == "socket" ? TransportKind::kSocket : TransportKind::kInProcess;
  c.max_redraws = j.at("max_redraws").get<std::size_t>();
  const auto& d = j.at("defense");
  c.defense.kind = parse_defense_kind(d.at("kind").get<std::string>());
  c.defense.add.epsilon = d.at("add").at("epsilon").get<double>();
  const auto& m = d.at("mult");
  c.defense.mult.epsilon = m.at("epsilon").get<double>();
  c.defense.mult.b1 = m.at("b1").get<double>();
  c.defense.mult.b2 = m.at("b2").get<double>();
  c.defense.mult.unsigned_clip = m.at("unsigned_clip").get<bool>();
  c.defense.mult.noise_location = m.at("noise_location").get<double>();
  const auto& h = d.at("hybrid");
  c.defense.hybrid.epsilon = h.at("epsilon").get<double>();
  c.defense.hybrid.q = h.at("q").get<double>();
  c.defense.hybrid.s_size = h.at("s_size").get<std::size_t>();
  c.defense.hybrid.enforce_feasibility = h.at("enforce_feasibility").get<bool>();
  if (!h.at("keep_probability").is_null()) c.defense.hybrid.keep_probability = h.at("keep_probability").get<double>();
  return c;
}

inline Json to_json(const TrainReport& r, bool include_timings = false) {
  Json j{{"schema_version", TrainReport::kSchemaVersion},
         {"protocol", r.protocol},
         {"config", config_to_json(r.config)},
         {"rounds", r.rounds},
         {"per_epoch_loss", r.per_epoch_loss},
         {"final_metrics",
          {{"accuracy", r.final_metrics.accuracy}, {"auc", r.final_metrics.auc}, {"loss", r.final_metrics.loss}}},
         {"attack_success", nullptr}};
  if (r.attack_success) j["attack_success"] = *r.attack_success;
  if (r.mean_forwarded) j["mean_forwarded"] = *r.mean_forwarded;
  if (include_timings) {
    j["timings"] = {{"total_s", r.timings.total_s},
                    {"crypto_s", r.timings.crypto_s},
                    {"channel_s", r.timings.channel_s}};
  }
  return j;
}

inline TrainReport report_from_json(const Json& j) {
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != TrainReport::kSchemaVersion) {
      throw ParseError("report: unsupported schema_version " + std::to_string(version));
    }
    TrainReport r;
    r.protocol = j.at("protocol").get<std::string>();
    r.config = config_from_json(j.at("config"));
    r.rounds = j.at("rounds").get<std::size_t>();
    r.per_epoch_loss = j.at("per_epoch_loss").get<std::vector<double>>();
    const auto& m = j.at("final_metrics");
    r.final_metrics = Metrics{m.at("accuracy").get<double>(), m.at("auc").get<double>(), m.at("loss").get<double>()};
    if (!j.at("attack_success").is_null()) r.attack_success = j.at("attack_success").get<double>();
    if (j.contains("mean_forwarded")) r.mean_forwarded = j.at("mean_forwarded").get<double>();
    if (j.contains("timings")) {
      const auto& t = j.at("timings");
      r.timings = Timings{t.at("total_s").get<double>(), t.at("crypto_s").get<double>(),
                          t.at("channel_s").get<double>()};
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
}

inline std::string dump_report(const TrainReport& r, bool include_timings = false) {
  return to_json(r, include_timings).dump(2) + "\n";
}

inline TrainReport parse_report(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
  return report_from_json(j);
}

}  // namespace vflr
