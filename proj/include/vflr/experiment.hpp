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

// Dataset preparation shared by the command-line tool and the tests:
// load or generate, split train/test, standardize on the train rows, and
// partition the columns between the two parties.

#pragma once

#include <charconv>
#include <limits>
#include <map>
#include <string>
#include <string_view>

#include "vflr/data.hpp"
#include "vflr/errors.hpp"

namespace vflr::experiment {

inline constexpr std::size_t kAllFeatures = std::numeric_limits<std::size_t>::max();

struct DatasetOptions {
  // A CSV path, or "synth:n=600,d=30,sep=3,seed=7" for generated data.
  std::string source;
  std::string label_column;  // header name or zero-based index; last column when empty
  bool has_header = true;
  double test_fraction = 0.2;
};

struct Prepared {
  data::VerticalSplit train;
  data::VerticalSplit test;
  data::LoadReport load;
  data::Standardizer scaler;
};

struct SynthSpec {
  std::size_t n = 600;
  std::size_t d = 30;
  double separation = 3.0;
  std::uint64_t seed = 1;
};

inline SynthSpec parse_synth(std::string_view spec) {
  SynthSpec s;
  std::map<std::string, std::string> kv;
  std::size_t start = 0;
  while (start <= spec.size()) {
    const std::size_t stop = std::min(spec.find(',', start), spec.size());
    const std::string_view item = spec.substr(start, stop - start);
    start = stop + 1;
    if (item.empty()) continue;
    const std::size_t eq = item.find('=');
    if (eq == std::string_view::npos) throw ConfigError("synth: expected key=value, got '" + std::string(item) + "'");
    kv[std::string(item.substr(0, eq))] = std::string(item.substr(eq + 1));
  }
  auto count = [&](const std::string& key, std::size_t& out) {
    auto it = kv.find(key);
    if (it == kv.end()) return;
    const auto& v = it->second;
    if (std::from_chars(v.data(), v.data() + v.size(), out).ec != std::errc()) {
      throw ConfigError("synth: bad value for " + key + ": '" + v + "'");
    }
    kv.erase(it);
  };
  std::size_t seed = s.seed;
  count("n", s.n);
  count("d", s.d);
  count("seed", seed);
  s.seed = seed;
  if (auto it = kv.find("sep"); it != kv.end()) {
    const auto v = data::detail::parse_double(it->second);
    if (!v) throw ConfigError("synth: bad value for sep: '" + it->second + "'");
    s.separation = *v;
    kv.erase(it);
  }
  if (!kv.empty()) throw ConfigError("synth: unknown key '" + kv.begin()->first + "'");
  return s;
}

inline data::LoadResult load(const DatasetOptions& opts) {
  constexpr std::string_view kSynth = "synth:";
  if (opts.source.rfind(kSynth, 0) == 0) {
    const SynthSpec s = parse_synth(std::string_view(opts.source).substr(kSynth.size()));
    data::LoadResult out;
    out.dataset = data::synth(s.n, s.d, s.separation, s.seed);
    out.report.rows_read = s.n;
    out.report.label_mapping = {"0", "1"};
    return out;
  }
  data::LabelColumn label;
  if (!opts.label_column.empty()) {
    std::size_t index = 0;
    const auto& v = opts.label_column;
    if (std::from_chars(v.data(), v.data() + v.size(), index).ec == std::errc() &&
        std::to_string(index) == v) {
      label = index;
    } else {
      label = v;
    }
  }
  return data::load_csv(opts.source, label, opts.has_header);
}

inline Prepared prepare(const data::Dataset& ds, std::size_t d_alice, double test_fraction, std::uint64_t seed) {
  const std::size_t d = ds.features();
  const std::size_t da = d_alice == kAllFeatures ? d : d_alice;
  const auto split = data::train_test_split(ds, test_fraction, seed);
  if (split.train.size() == 0) throw ConfigError("train split is empty");
  Prepared out;
  out.scaler = data::Standardizer::fit(split.train.x);
  const data::Dataset train{out.scaler.apply(split.train.x), split.train.y, ds.feature_names};
  const data::Dataset test{out.scaler.apply(split.test.x), split.test.y, ds.feature_names};
  out.train = data::vertical_split(train, da);
  out.test = data::vertical_split(test, da);
  return out;
}

inline Prepared prepare(const DatasetOptions& opts, std::size_t d_alice, std::uint64_t seed) {
  data::LoadResult loaded = load(opts);
  Prepared out = prepare(loaded.dataset, d_alice, opts.test_fraction, seed);
  out.load = std::move(loaded.report);
  return out;
}

}  // namespace vflr::experiment
