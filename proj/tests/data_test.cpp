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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "vflr/data.hpp"
#include "vflr/experiment.hpp"
#include "vflr/protocol.hpp"

namespace vflr::data {
namespace {

TEST(LoadCsvTest, NumericWithHeader) {
  const auto res = load_csv_text("a,b,label\n1.5,2,1\n-3,4e1,0\n");
  EXPECT_EQ(res.dataset.size(), 2u);
  EXPECT_EQ(res.dataset.features(), 2u);
  EXPECT_EQ(res.dataset.feature_names, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(res.dataset.x, DenseMatrix({{1.5, 2.0}, {-3.0, 40.0}}));
  EXPECT_EQ(res.dataset.y, (Labels{1, 0}));
}

TEST(LoadCsvTest, CensusStyleLabels) {
  const std::string text =
      "age,workclass,income\n"
      "39,State-gov,<=50K\n"
      "50,Self-emp,<=50K\n"
      "38,Private,>50K\n"
      "53,Private,<=50K\n"
      "28,Private,>50K\n"
      "37,Private,<=50K\n"
      "49,Private,<=50K\n"
      "52,Self-emp,>50K\n"
      "31,Private,>50K\n"
      "42,Private,>50K\n";
  const auto res = load_csv_text(text, std::string("income"));
  EXPECT_EQ(res.dataset.y, (Labels{0, 0, 1, 0, 1, 0, 0, 1, 1, 1}));
  EXPECT_EQ(res.report.label_mapping.first, "<=50K");
  EXPECT_EQ(res.report.label_mapping.second, ">50K");
  EXPECT_EQ(res.report.one_hot_columns, (std::vector<std::string>{"workclass"}));
  EXPECT_EQ(res.dataset.features(), 4u);
  EXPECT_EQ(res.dataset.feature_names[1], "workclass=Private");
  EXPECT_DOUBLE_EQ(res.dataset.x(0, 3), 1.0);
  EXPECT_DOUBLE_EQ(res.dataset.x(0, 1), 0.0);
}

TEST(LoadCsvTest, MissingRowsDroppedAndConstantFlagged) {
  const auto res = load_csv_text("a,c,y\n1,7,1\n?,7,0\n3,7,0\n,7,1\n");
  EXPECT_EQ(res.report.rows_read, 4u);
  EXPECT_EQ(res.report.rows_dropped, 2u);
  EXPECT_EQ(res.dataset.size(), 2u);
  EXPECT_EQ(res.report.constant_columns, (std::vector<std::string>{"c"}));
  EXPECT_EQ(res.dataset.features(), 2u);
}

TEST(LoadCsvTest, LabelSelectionAndQuoting) {
  const auto by_index = load_csv_text("1,\"x,y\",2\n0,\"x,y\",3\n", std::size_t{0}, false);
  EXPECT_EQ(by_index.dataset.y, (Labels{1, 0}));
  EXPECT_EQ(by_index.dataset.feature_names, (std::vector<std::string>{"col1=x,y", "col2"}));
  const auto numeric_labels = load_csv_text("f,y\n1,2\n2,4\n");
  EXPECT_EQ(numeric_labels.dataset.y, (Labels{0, 1}));
}

TEST(LoadCsvTest, Errors) {
  EXPECT_THROW(load_csv_text(""), IngestionError);
  EXPECT_THROW(load_csv_text("a,y\n1,0\n2,1\n3,2\n"), IngestionError);
  EXPECT_THROW(load_csv_text("a,y\n1,0\n2\n"), IngestionError);
  EXPECT_THROW(load_csv_text("a,y\n1,0\n", std::string("nope")), IngestionError);
  EXPECT_THROW(load_csv_text("a,y\n\"1,0\n"), IngestionError);
  EXPECT_THROW(load_csv("/nonexistent/file.csv"), IngestionError);
  try {
    load_csv_text("a,y\n1,0\n2,1\n3,2\n");
  } catch (const IngestionError& e) {
    EXPECT_NE(std::string(e.what()).find("row 4"), std::string::npos) << e.what();
  }
}

TEST(LoadCsvTest, DeterministicOnSameBytes) {
  const std::string text = "a,b,y\n0.1,2,1\n0.3,-1,0\n5,5,1\n";
  const auto a = load_csv_text(text);
  const auto b = load_csv_text(text);
  EXPECT_EQ(a.dataset.x, b.dataset.x);
  EXPECT_EQ(a.dataset.y, b.dataset.y);
}

TEST(LoadCsvTest, BreastCancerFile) {
  const auto res = load_csv(std::string(VFLR_DATA_DIR) + "/breast_cancer.csv");
  EXPECT_EQ(res.dataset.size(), 569u);
  EXPECT_EQ(res.dataset.features(), 30u);
  std::size_t positives = 0;
  for (auto v : res.dataset.y) positives += v;
  EXPECT_EQ(positives, 357u);
}

TEST(StandardizeTest, Examples) {
  const Dataset ds{DenseMatrix({{0.0, 5.0}, {2.0, 5.0}}), {0, 1}, {"a", "b"}};
  const Standardized s = standardize(ds);
  EXPECT_EQ(s.dataset.x, DenseMatrix({{-1.0, 5.0}, {1.0, 5.0}}));
  EXPECT_DOUBLE_EQ(s.scaler.stds[1], 1.0);
  EXPECT_TRUE(s.scaler.constant[1]);
  EXPECT_FALSE(s.scaler.constant[0]);
}

TEST(StandardizeTest, RoundtripAndMoments) {
  const Dataset ds = synth(100, 5, 2.0, 3);
  const Standardized s = standardize(ds);
  const DenseMatrix back = s.scaler.invert(s.dataset.x);
  for (std::size_t r = 0; r < 100; ++r)
    for (std::size_t c = 0; c < 5; ++c) {
      EXPECT_NEAR(back(r, c), ds.x(r, c), 1e-12);
    }
  for (std::size_t c = 0; c < 5; ++c) {
    double sum = 0.0, ss = 0.0;
    for (std::size_t r = 0; r < 100; ++r) {
      sum += s.dataset.x(r, c);
      ss += s.dataset.x(r, c) * s.dataset.x(r, c);
    }
    EXPECT_NEAR(sum / 100.0, 0.0, 1e-12);
    EXPECT_NEAR(ss / 100.0, 1.0, 1e-12);
  }
}

TEST(VerticalSplitTest, ShapesAndAlignment) {
  const Dataset ds = synth(50, 30, 2.0, 4);
  const VerticalSplit v = vertical_split(ds, 10);
  EXPECT_EQ(v.alice.rows(), 50u);
  EXPECT_EQ(v.alice.cols(), 10u);
  EXPECT_EQ(v.bob.cols(), 20u);
  EXPECT_EQ(v.alice_features.front(), "x0");
  EXPECT_EQ(v.bob_features.front(), "x10");
  EXPECT_EQ(v.pooled(), ds.x);
  EXPECT_EQ(v.labels, ds.y);
  EXPECT_EQ(vertical_split(ds, 30).d_bob(), 0u);
  EXPECT_EQ(vertical_split(ds, 0).d_alice(), 0u);
  EXPECT_THROW(vertical_split(ds, 31), ConfigError);
}

TEST(SynthTest, DeterministicAndLearnable) {
  const Dataset a = synth(200, 8, 10.0, 5);
  const Dataset b = synth(200, 8, 10.0, 5);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.y, b.y);
  EXPECT_NE(synth(200, 8, 10.0, 6).x, a.x);
  EXPECT_THROW(synth(0, 8, 1.0, 1), ConfigError);

  TrainConfig cfg;
  cfg.epochs = 20;
  const auto run = protocol::centralized_train(a.x, a.y, cfg);
  EXPECT_GE(run.report.final_metrics.accuracy, 0.99);
}

TEST(SynthTest, ZeroSeparationIsChance) {
  const Dataset train = synth(400, 5, 0.0, 7);
  const Dataset test = synth(4000, 5, 0.0, 8);
  TrainConfig cfg;
  cfg.epochs = 10;
  const auto run = protocol::centralized_train(train.x, train.y, cfg, nullptr, &test.x, &test.y);
  EXPECT_NEAR(run.report.final_metrics.accuracy, 0.5, 0.05);
}

TEST(TrainTestSplitTest, Sizes) {
  const Dataset ten = synth(10, 2, 1.0, 1);
  const auto s = train_test_split(ten, 0.2, 9);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.test.size(), 2u);
  const auto again = train_test_split(ten, 0.2, 9);
  EXPECT_EQ(s.train_rows, again.train_rows);
  const auto halves = train_test_split(synth(4, 2, 1.0, 1), 0.5, 9);
  EXPECT_EQ(halves.train.size(), 2u);
  EXPECT_EQ(halves.test.size(), 2u);
  EXPECT_THROW(train_test_split(ten, 0.0, 1), ConfigError);
  EXPECT_THROW(train_test_split(ten, 1.0, 1), ConfigError);
  for (std::size_t k = 0; k < s.train_rows.size(); ++k) {
    EXPECT_EQ(s.train.y[k], ten.y[s.train_rows[k]]);
    EXPECT_EQ(s.train.x(k, 1), ten.x(s.train_rows[k], 1));
  }
}

TEST(ExperimentTest, SynthSpecAndPrepare) {
  const auto spec = experiment::parse_synth("n=120,d=6,sep=2.5,seed=3");
  EXPECT_EQ(spec.n, 120u);
  EXPECT_EQ(spec.d, 6u);
  EXPECT_DOUBLE_EQ(spec.separation, 2.5);
  EXPECT_EQ(spec.seed, 3u);
  EXPECT_THROW(experiment::parse_synth("n=1,bogus=2"), ConfigError);
  EXPECT_THROW(experiment::parse_synth("n=x"), ConfigError);

  const auto prep = experiment::prepare({"synth:n=120,d=6,sep=2.5,seed=3", "", true, 0.25}, 4, 1);
  EXPECT_EQ(prep.train.size(), 90u);
  EXPECT_EQ(prep.test.size(), 30u);
  EXPECT_EQ(prep.train.d_alice(), 4u);
  EXPECT_EQ(prep.test.d_bob(), 2u);
}

}  // namespace
}  // namespace vflr::data
