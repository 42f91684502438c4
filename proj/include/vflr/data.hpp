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

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "vflr/errors.hpp"
#include "vflr/numeric.hpp"
#include "vflr/rng.hpp"

namespace vflr::data {

using Labels = std::vector<std::uint8_t>;

struct Dataset {
  DenseMatrix x;
  Labels y;
  std::vector<std::string> feature_names;

  std::size_t size() const { return y.size(); }
  std::size_t features() const { return x.cols(); }

  DenseVector label_vector() const {
    DenseVector out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i];
    return out;
  }

  Dataset select(std::span<const std::size_t> rows) const {
    Dataset out{x.select_rows(rows), Labels(rows.size()), feature_names};
    for (std::size_t k = 0; k < rows.size(); ++k) out.y[k] = y[rows[k]];
    return out;
  }
};

inline DenseVector to_vector(std::span<const std::uint8_t> bits) {
  DenseVector out(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) out[i] = bits[i];
  return out;
}

// ---------------------------------------------------------------------------
// CSV ingestion (comma delimiter, optional header, double-quoted fields).

struct LoadReport {
  std::size_t rows_read = 0;
  std::size_t rows_dropped = 0;  // rows with a missing value
  std::vector<std::string> constant_columns;
  std::vector<std::string> one_hot_columns;
  // Original label values mapped to 0 and 1.
  std::pair<std::string, std::string> label_mapping;
};

struct LoadResult {
  Dataset dataset;
  LoadReport report;
};

// Which column holds the label: by header name, by zero-based index, or the
// last column when unset.
using LabelColumn = std::variant<std::monostate, std::string, std::size_t>;

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

inline bool is_missing(const std::string& v) { return v.empty() || v == "?" || v == "NA" || v == "NaN"; }

inline std::optional<double> parse_double(const std::string& v) {
  double out = 0.0;
  const char* begin = v.data();
  const char* end = v.data() + v.size();
  if (begin != end && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out)) return std::nullopt;
  return out;
}

// Splits CSV text into records. Quoted fields may contain commas, doubled
// quotes and newlines. Blank lines are skipped.
inline std::vector<std::vector<std::string>> parse_records(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  auto end_record = [&] {
    if (field_started || !record.empty()) {
      record.push_back(trim(field));
      records.push_back(std::move(record));
    }
    record.clear();
    field.clear();
    field_started = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        record.push_back(trim(field));
        field.clear();
        field_started = true;
        break;
      case '\n':
        ++line;
        end_record();
        break;
      case '\r':
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) throw IngestionError("csv: unterminated quoted field near line " + std::to_string(line));
  end_record();
  return records;
}

}  // namespace detail

inline LoadResult load_csv_text(std::string_view text, const LabelColumn& label_column = {},
                                bool has_header = true) {
  auto records = detail::parse_records(text);
  if (records.empty()) throw IngestionError("csv: no data");
  std::vector<std::string> header;
  std::size_t first_data = 0;
  const std::size_t width = records.front().size();
  if (has_header) {
    header = records.front();
    first_data = 1;
  } else {
    for (std::size_t c = 0; c < width; ++c) header.push_back("col" + std::to_string(c));
  }
  if (width < 1) throw IngestionError("csv: empty header");
  for (std::size_t r = 0; r < records.size(); ++r) {
    if (records[r].size() != width) {
      throw IngestionError("csv: row " + std::to_string(r + 1) + " has " +
                           std::to_string(records[r].size()) + " fields, expected " +
                           std::to_string(width));
    }
  }

  std::size_t label_idx = width - 1;
  if (const auto* name = std::get_if<std::string>(&label_column)) {
    const auto it = std::find(header.begin(), header.end(), *name);
    if (it == header.end()) throw IngestionError("csv: label column '" + *name + "' not found");
    label_idx = static_cast<std::size_t>(it - header.begin());
  } else if (const auto* idx = std::get_if<std::size_t>(&label_column)) {
    if (*idx >= width) throw IngestionError("csv: label column index out of range");
    label_idx = *idx;
  }

  LoadResult result;
  std::vector<const std::vector<std::string>*> kept;
  std::vector<std::size_t> kept_line;  // 1-based record number in the file
  for (std::size_t r = first_data; r < records.size(); ++r) {
    ++result.report.rows_read;
    const auto& rec = records[r];
    if (std::any_of(rec.begin(), rec.end(), detail::is_missing)) {
      ++result.report.rows_dropped;
      continue;
    }
    kept.push_back(&rec);
    kept_line.push_back(r + 1);
  }
  if (kept.empty()) throw IngestionError("csv: no complete rows");

  // Label mapping.
  std::set<std::string> label_values;
  bool labels_numeric = true;
  for (std::size_t k = 0; k < kept.size(); ++k) {
    const std::string& v = (*kept[k])[label_idx];
    label_values.insert(v);
    if (label_values.size() > 2) {
      throw IngestionError("csv: label column '" + header[label_idx] +
                           "' has more than two distinct values (third value '" + v + "' at row " +
                           std::to_string(kept_line[k]) + ")");
    }
    labels_numeric = labels_numeric && detail::parse_double(v).has_value();
  }
  std::map<std::string, std::uint8_t> label_map;
  if (labels_numeric) {
    std::vector<std::pair<double, std::string>> sorted;
    for (const auto& v : label_values) sorted.emplace_back(*detail::parse_double(v), v);
    std::sort(sorted.begin(), sorted.end());
    const bool zero_one = std::all_of(sorted.begin(), sorted.end(), [](const auto& p) {
      return p.first == 0.0 || p.first == 1.0;
    });
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      label_map[sorted[i].second] =
          zero_one ? static_cast<std::uint8_t>(sorted[i].first) : static_cast<std::uint8_t>(i);
    }
  } else {
    if (label_values.size() != 2) {
      throw IngestionError("csv: label column '" + header[label_idx] + "' is not binary");
    }
    std::uint8_t next = 0;
    for (const auto& v : label_values) label_map[v] = next++;
  }
  for (const auto& [value, bit] : label_map) {
    (bit == 0 ? result.report.label_mapping.first : result.report.label_mapping.second) = value;
  }

  // Feature columns: numeric passes through, anything else is one-hot.
  struct Column {
    std::size_t source;
    std::optional<std::string> category;  // set for one-hot indicator columns
  };
  std::vector<Column> columns;
  for (std::size_t c = 0; c < width; ++c) {
    if (c == label_idx) continue;
    bool numeric = true;
    for (const auto* rec : kept) {
      if (!detail::parse_double((*rec)[c])) {
        numeric = false;
        break;
      }
    }
    if (numeric) {
      columns.push_back({c, std::nullopt});
      result.dataset.feature_names.push_back(header[c]);
    } else {
      std::set<std::string> categories;
      for (const auto* rec : kept) categories.insert((*rec)[c]);
      result.report.one_hot_columns.push_back(header[c]);
      for (const auto& cat : categories) {
        columns.push_back({c, cat});
        result.dataset.feature_names.push_back(header[c] + "=" + cat);
      }
    }
  }

  std::vector<double> values;
  values.reserve(kept.size() * columns.size());
  result.dataset.y.reserve(kept.size());
  for (const auto* rec : kept) {
    for (const auto& col : columns) {
      const std::string& v = (*rec)[col.source];
      values.push_back(col.category ? (v == *col.category ? 1.0 : 0.0) : *detail::parse_double(v));
    }
    result.dataset.y.push_back(label_map.at((*rec)[label_idx]));
  }
  result.dataset.x = DenseMatrix(kept.size(), columns.size(), std::move(values));

  for (std::size_t c = 0; c < columns.size(); ++c) {
    const double first = result.dataset.x(0, c);
    bool constant = true;
    for (std::size_t r = 1; r < kept.size() && constant; ++r) constant = result.dataset.x(r, c) == first;
    if (constant) result.report.constant_columns.push_back(result.dataset.feature_names[c]);
  }
  return result;
}

inline LoadResult load_csv(const std::string& path, const LabelColumn& label_column = {},
                           bool has_header = true) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("csv: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return load_csv_text(buf.str(), label_column, has_header);
  } catch (const IngestionError& e) {
    throw IngestionError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Preprocessing

// Per-feature affine scaling fitted on one matrix and reusable on others.
// Constant columns (zero deviation) are left unchanged: their std is
// recorded as 1 and they are skipped by apply/invert.
struct Standardizer {
  std::vector<double> means;
  std::vector<double> stds;
  std::vector<bool> constant;

  static Standardizer fit(const DenseMatrix& x) {
    const std::size_t d = x.cols();
    Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0), std::vector<bool>(d, true)};
    if (x.rows() == 0) return s;
    const double n = static_cast<double>(x.rows());
    for (std::size_t c = 0; c < d; ++c) {
      double sum = 0.0;
      for (std::size_t r = 0; r < x.rows(); ++r) sum += x(r, c);
      const double mean = sum / n;
      double ss = 0.0;
      for (std::size_t r = 0; r < x.rows(); ++r) ss += (x(r, c) - mean) * (x(r, c) - mean);
      const double sd = std::sqrt(ss / n);
      s.means[c] = mean;
      s.constant[c] = !(sd > 0.0);
      s.stds[c] = s.constant[c] ? 1.0 : sd;
    }
    return s;
  }

  DenseMatrix apply(const DenseMatrix& x) const {
    vflr::detail::require_same_length(x.cols(), means.size(), "Standardizer::apply");
    DenseMatrix out = x;
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t c = 0; c < x.cols(); ++c)
        if (!constant[c]) out(r, c) = (x(r, c) - means[c]) / stds[c];
    return out;
  }

  DenseMatrix invert(const DenseMatrix& z) const {
    vflr::detail::require_same_length(z.cols(), means.size(), "Standardizer::invert");
    DenseMatrix out = z;
    for (std::size_t r = 0; r < z.rows(); ++r)
      for (std::size_t c = 0; c < z.cols(); ++c)
        if (!constant[c]) out(r, c) = z(r, c) * stds[c] + means[c];
    return out;
  }
};

struct Standardized {
  Dataset dataset;
  Standardizer scaler;
};

inline Standardized standardize(const Dataset& ds) {
  Standardizer scaler = Standardizer::fit(ds.x);
  return Standardized{Dataset{scaler.apply(ds.x), ds.y, ds.feature_names}, std::move(scaler)};
}

// ---------------------------------------------------------------------------
// Vertical partition: the first d_alice columns go to the passive party, the
// rest and the labels to the active party. Rows stay aligned.

struct VerticalSplit {
  DenseMatrix alice;
  DenseMatrix bob;
  Labels labels;
  std::vector<std::string> alice_features;
  std::vector<std::string> bob_features;

  std::size_t size() const { return labels.size(); }
  std::size_t d_alice() const { return alice.cols(); }
  std::size_t d_bob() const { return bob.cols(); }

  // [alice | bob], the pooled view used by centralized training.
  DenseMatrix pooled() const { return DenseMatrix::hconcat(alice, bob); }
};

inline VerticalSplit vertical_split(const Dataset& ds, std::size_t d_alice) {
  const std::size_t d = ds.features();
  if (d_alice > d) {
    throw ConfigError("vertical_split: d_alice = " + std::to_string(d_alice) +
                      " exceeds feature count " + std::to_string(d));
  }
  VerticalSplit split{ds.x.select_cols(0, d_alice), ds.x.select_cols(d_alice, d - d_alice), ds.y, {}, {}};
  if (ds.feature_names.size() == d) {
    split.alice_features.assign(ds.feature_names.begin(),
                                ds.feature_names.begin() + static_cast<std::ptrdiff_t>(d_alice));
    split.bob_features.assign(ds.feature_names.begin() + static_cast<std::ptrdiff_t>(d_alice),
                              ds.feature_names.end());
  }
  return split;
}

// ---------------------------------------------------------------------------
// Synthetic data: two unit-variance Gaussian clusters centred at
// +-separation/2 along a random unit direction. The label is the cluster.

inline Dataset synth(std::size_t n, std::size_t d, double separation, std::uint64_t seed) {
  if (n < 1 || d < 1) throw ConfigError("synth: n and d must be >= 1");
  RngStream rng = derive_stream(seed, PartyId::kNone, StreamPurpose::kSynth);
  std::vector<double> direction(d);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& v : direction) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
  } while (norm == 0.0);
  for (double& v : direction) v /= norm;

  Dataset ds{DenseMatrix(n, d), Labels(n), {}};
  for (std::size_t j = 0; j < d; ++j) ds.feature_names.push_back("x" + std::to_string(j));
  for (std::size_t i = 0; i < n; ++i) {
    const bool positive = rng.bernoulli(0.5);
    ds.y[i] = positive ? 1 : 0;
    const double offset = (positive ? 0.5 : -0.5) * separation;
    for (std::size_t j = 0; j < d; ++j) ds.x(i, j) = offset * direction[j] + rng.normal();
  }
  return ds;
}

// ---------------------------------------------------------------------------

struct TrainTestSplit {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> train_rows;  // indices into the source dataset
  std::vector<std::size_t> test_rows;
};

// Seeded shuffle, then the last round(n * test_fraction) rows form the test set.
inline TrainTestSplit train_test_split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("train_test_split: test fraction must lie in (0, 1)");
  }
  const std::size_t n = ds.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  RngStream rng = derive_stream(seed, PartyId::kNone, StreamPurpose::kSplit);
  rng.shuffle(std::span<std::size_t>(order));
  const auto test_count = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
  const std::size_t train_count = n - std::min(test_count, n);
  TrainTestSplit out;
  out.train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_count));
  out.test_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(train_count), order.end());
  out.train = ds.select(out.train_rows);
  out.test = ds.select(out.test_rows);
  return out;
}

}  // namespace vflr::data
