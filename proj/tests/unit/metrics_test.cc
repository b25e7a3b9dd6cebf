/*
 * Copyright 2026 The sdtriplet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include "sdtriplet/metrics.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sdtriplet/errors.h"
#include "support/fixtures.h"
#include "support/oracles.h"

namespace sdtriplet {
namespace {

using testing::Labels;

std::vector<uint8_t> Bits(std::initializer_list<int> v) {
  return std::vector<uint8_t>(v.begin(), v.end());
}

TEST(AveragePrecisionTest, WorkedExample) {
  const std::vector<double> s = {0.9, 0.8, 0.7};
  EXPECT_NEAR(*AveragePrecision(s, Bits({1, 0, 1})), (1.0 + 2.0 / 3.0) / 2, 1e-15);
}

TEST(AveragePrecisionTest, PerfectRankingAndUndefined) {
  const std::vector<double> s = {0.1, 0.9, 0.8, 0.2};
  EXPECT_DOUBLE_EQ(*AveragePrecision(s, Bits({0, 1, 1, 0})), 1.0);
  EXPECT_FALSE(AveragePrecision(s, Bits({0, 0, 0, 0})).has_value());
  EXPECT_THROW(AveragePrecision(s, Bits({0, 1})), ShapeError);
}

TEST(AveragePrecisionTest, TiesBreakByIndex) {
  const std::vector<double> s = {0.5, 0.5};
  EXPECT_DOUBLE_EQ(*AveragePrecision(s, Bits({1, 0})), 1.0);
  EXPECT_DOUBLE_EQ(*AveragePrecision(s, Bits({0, 1})), 0.5);
}

TEST(AveragePrecisionTest, InvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(15), t(15);
    std::vector<uint8_t> l(15);
    for (int i = 0; i < 15; ++i) {
      s[i] = UniformUnit(rng);
      t[i] = std::exp(3 * s[i]) - 7;
      l[i] = rng() % 3 == 0;
    }
    const auto a = AveragePrecision(s, l);
    const auto b = AveragePrecision(t, l);
    ASSERT_EQ(a.has_value(), b.has_value());
    if (a) EXPECT_DOUBLE_EQ(*a, *b);
  }
}

TEST(AveragePrecisionTest, MatchesOracleWithTies) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + rng() % 25;
    std::vector<double> s(n);
    std::vector<uint8_t> l(n);
    std::vector<int> li(n);
    for (int i = 0; i < n; ++i) {
      s[i] = (rng() % 6) / 5.0;
      li[i] = l[i] = rng() % 2;
    }
    const auto got = AveragePrecision(s, l);
    const auto want = oracle::AveragePrecision(s, li);
    ASSERT_EQ(got.has_value(), want.has_value());
    if (got) EXPECT_NEAR(*got, *want, 1e-12);
  }
}

TEST(MeanAveragePrecisionTest, MeanOfDefinedClasses) {
  // Class 0: AP 1; class 1: AP 0.5; class 2: no positives.
  const std::vector<std::vector<double>> scores = {{0.9, 0.1, 0.3}, {0.2, 0.8, 0.4}};
  const std::vector<LabelVector> labels = {Bits({1, 1, 0}), Bits({0, 0, 0})};
  const MapResult r = MeanAveragePrecision(scores, labels, MapMode::kGlobal, false);
  EXPECT_DOUBLE_EQ(r.map, 0.75);
  EXPECT_EQ(r.excluded_classes, 1);
  EXPECT_FALSE(r.per_class[2].has_value());
  const MapResult strict = MeanAveragePrecision(scores, labels, MapMode::kGlobal, true);
  EXPECT_DOUBLE_EQ(strict.map, 0.5);
}

TEST(MeanAveragePrecisionTest, NoDefinedClassIsNaN) {
  const std::vector<std::vector<double>> scores = {{0.1, 0.2}};
  const std::vector<LabelVector> labels = {Bits({0, 0})};
  EXPECT_TRUE(std::isnan(MeanAveragePrecision(scores, labels, MapMode::kGlobal, false).map));
}

TEST(MeanAveragePrecisionTest, PerfectPredictionsGiveOne) {
  const auto d = GenerateSyntheticDataset(testing::TinySpec(1));
  PredictionSet p(d.manifest.num_classes());
  for (const FrameRecord& f : d.manifest.frames()) {
    p.Set(f.key(), std::vector<double>(f.labels.begin(), f.labels.end()));
  }
  EXPECT_DOUBLE_EQ(TripletMap(p, d.manifest).map, 1.0);
  MetricOptions pv;
  pv.mode = MapMode::kPerVideo;
  EXPECT_DOUBLE_EQ(TripletMap(p, d.manifest, pv).map, 1.0);
}

struct RandomInstance {
  DatasetManifest manifest;
  PredictionSet predictions;
  std::vector<std::vector<double>> scores;
  std::vector<std::vector<int>> truth;
  std::vector<std::string> video;
};

RandomInstance MakeInstance(uint64_t seed, int frames, int videos) {
  std::mt19937_64 rng(seed);
  auto vocab = testing::FullVocab(1, 2, 3);
  std::vector<std::string> ids;
  std::vector<LabelVector> labels;
  for (int f = 0; f < frames; ++f) {
    ids.push_back("v" + std::to_string(f % videos));
    LabelVector l(6);
    for (auto& x : l) x = rng() % 4 == 0;
    labels.push_back(l);
  }
  RandomInstance inst{testing::MakeManifest(vocab, ids, labels), PredictionSet(6), {}, {}, {}};
  for (const FrameRecord& f : inst.manifest.frames()) {
    std::vector<double> s(6);
    for (double& x : s) x = (rng() % 11) / 10.0;
    inst.predictions.Set(f.key(), s);
    inst.scores.push_back(s);
    inst.truth.emplace_back(f.labels.begin(), f.labels.end());
    inst.video.push_back(f.video_id);
  }
  return inst;
}

TEST(TripletMapTest, GlobalMatchesOracle) {
  for (uint64_t seed = 1; seed <= 30; ++seed) {
    const RandomInstance inst = MakeInstance(seed, 20, 1);
    for (bool strict : {false, true}) {
      MetricOptions o;
      o.undefined_as_zero = strict;
      EXPECT_NEAR(TripletMap(inst.predictions, inst.manifest, o).map,
                  oracle::GlobalMap(inst.scores, inst.truth, strict), 1e-9);
    }
  }
}

TEST(TripletMapTest, PerVideoMatchesOracle) {
  for (uint64_t seed = 1; seed <= 30; ++seed) {
    const RandomInstance inst = MakeInstance(seed, 24, 3);
    MetricOptions o;
    o.mode = MapMode::kPerVideo;
    EXPECT_NEAR(TripletMap(inst.predictions, inst.manifest, o).map,
                oracle::PerVideoMap(inst.scores, inst.truth, inst.video, false), 1e-9);
  }
}

TEST(TripletMapTest, CleanLabelsUsedOnRequest) {
  auto vocab = testing::FullVocab(1, 1, 2);
  std::vector<FrameRecord> frames(2);
  frames[0] = {"v", 0, "synth:16:1", Labels(2, {1}), 0, Labels(2, {0})};
  frames[1] = {"v", 1, "synth:16:2", Labels(2, {0}), 0, Labels(2, {1})};
  const DatasetManifest m(vocab, frames, 1);
  PredictionSet p(2);
  p.Set({"v", 0}, {0.9, 0.1});
  p.Set({"v", 1}, {0.1, 0.9});
  MetricOptions clean;
  clean.labels = LabelSource::kClean;
  EXPECT_DOUBLE_EQ(TripletMap(p, m, clean).map, 1.0);
  EXPECT_DOUBLE_EQ(TripletMap(p, m).map, 0.5);
}

TEST(TripletMapTest, UnknownFrameRejected) {
  const RandomInstance inst = MakeInstance(1, 5, 1);
  PredictionSet p = inst.predictions;
  p.Set({"ghost", 0}, std::vector<double>(6, 0.5));
  EXPECT_THROW(TripletMap(p, inst.manifest), CoverageError);
}

TEST(ComponentMapTest, ProjectionMatchesOracle) {
  const TripletVocabulary v = TripletVocabulary::Full(2, 3, 2);
  std::vector<int> inst, verb, target;
  for (const Triplet& t : v.triplets()) {
    inst.push_back(t.instrument);
    verb.push_back(t.verb);
    target.push_back(t.target);
  }
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(12);
    for (double& x : s) x = UniformUnit(rng);
    EXPECT_EQ(ProjectToComponent(s, v, Component::kInstrument),
              oracle::MaxProject(s, inst, 2));
    EXPECT_EQ(ProjectToComponent(s, v, Component::kVerb), oracle::MaxProject(s, verb, 3));
    EXPECT_EQ(ProjectToComponent(s, v, Component::kTarget),
              oracle::MaxProject(s, target, 2));
  }
}

TEST(ComponentMapTest, SingleActiveTripletPredictedPerfectly) {
  auto vocab = testing::FullVocab(2, 2, 2);
  const DatasetManifest m = testing::MakeManifest(
      vocab, {"v", "v"}, {Labels(8, {5}), Labels(8, {2})});
  PredictionSet p(8);
  p.Set({"v", 0}, {0, 0, 0, 0, 0, 1, 0, 0});
  p.Set({"v", 1}, {0, 0, 1, 0, 0, 0, 0, 0});
  for (Component c : {Component::kInstrument, Component::kVerb, Component::kTarget}) {
    EXPECT_DOUBLE_EQ(DisentangledComponentMap(p, m, c).map, 1.0) << ComponentName(c);
  }
}

TEST(TopKTest, RankThreeHitsRankSixMisses) {
  auto vocab = testing::FullVocab(1, 2, 4);
  const DatasetManifest m =
      testing::MakeManifest(vocab, {"v", "v"}, {Labels(8, {2}), Labels(8, {5})});
  PredictionSet p(8);
  const std::vector<double> s = {0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2};
  p.Set({"v", 0}, s);
  p.Set({"v", 1}, s);
  EXPECT_DOUBLE_EQ(*TopKAccuracy(p, m), 0.5);
  MetricOptions k9;
  k9.top_k = 9;
  EXPECT_THROW(TopKAccuracy(p, m, k9), RangeError);
}

TEST(TopKTest, TieAtKthResolvedByClassId) {
  EXPECT_EQ(TopKClasses(std::vector<double>{0.5, 0.7, 0.5, 0.5}, 2),
            (std::vector<int>{1, 0}));
}

TEST(TopKTest, MatchesOracleAndIsMonotoneInK) {
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    const RandomInstance inst = MakeInstance(seed, 100, 4);
    double prev = 0.0;
    for (int k = 1; k <= 6; ++k) {
      for (TopKRule rule : {TopKRule::kAnyInTopK, TopKRule::kAllInTopK}) {
        MetricOptions o;
        o.top_k = k;
        o.top_k_rule = rule;
        const auto got = TopKAccuracy(inst.predictions, inst.manifest, o);
        const auto want = oracle::TopKAccuracy(inst.scores, inst.truth, k,
                                               rule == TopKRule::kAllInTopK);
        ASSERT_EQ(got.has_value(), want.has_value());
        if (got) EXPECT_DOUBLE_EQ(*got, *want);
        if (got && rule == TopKRule::kAnyInTopK) {
          EXPECT_GE(*got, prev);
          prev = *got;
        }
      }
    }
  }
}

TEST(PerVideoReportTest, EntriesAreLocalToEachVideo) {
  const RandomInstance inst = MakeInstance(3, 30, 3);
  const auto table = PerVideoReport(inst.predictions, inst.manifest);
  ASSERT_EQ(table.size(), 3u);
  for (const auto& [video, map] : table) {
    std::vector<std::vector<double>> s;
    std::vector<std::vector<int>> t;
    for (size_t f = 0; f < inst.video.size(); ++f) {
      if (inst.video[f] != video) continue;
      s.push_back(inst.scores[f]);
      t.push_back(inst.truth[f]);
    }
    ASSERT_TRUE(map.has_value());
    EXPECT_NEAR(*map, oracle::GlobalMap(s, t, false), 1e-12);
  }
}

TEST(PerVideoReportTest, OneVideoEqualsGlobal) {
  const RandomInstance inst = MakeInstance(4, 15, 1);
  const auto table = PerVideoReport(inst.predictions, inst.manifest);
  ASSERT_EQ(table.size(), 1u);
  EXPECT_DOUBLE_EQ(*table.begin()->second, TripletMap(inst.predictions, inst.manifest).map);
}

TEST(PerVideoReportTest, SortedDescendingWithUndefinedLast) {
  std::map<std::string, std::optional<double>> t = {
      {"a", 0.5}, {"b", std::nullopt}, {"c", 0.9}, {"d", 0.5}};
  const auto sorted = SortPerVideo(t);
  EXPECT_EQ(sorted[0].first, "c");
  EXPECT_EQ(sorted[1].first, "a");
  EXPECT_EQ(sorted[2].first, "d");
  EXPECT_EQ(sorted[3].first, "b");
  EXPECT_EQ(PerVideoTableCsv(t), "video_id,map\nc,0.900000000\na,0.500000000\n"
                                 "d,0.500000000\nb,\n");
}

TEST(EvaluateTest, ReportCollectsEverything) {
  const RandomInstance inst = MakeInstance(5, 40, 2);
  const EvalReport r = Evaluate(inst.predictions, inst.manifest);
  EXPECT_EQ(r.num_frames, 40u);
  EXPECT_EQ(r.components.size(), 3u);
  EXPECT_EQ(r.per_video.size(), 2u);
  ASSERT_TRUE(r.top_k.has_value());
  const std::string json = EvalReportToJson(r);
  EXPECT_NE(json.find("\"triplet\""), std::string::npos);
}

TEST(MetricNamesTest, ParseKnownNames) {
  EXPECT_EQ(ParseMapMode("per_video"), MapMode::kPerVideo);
  EXPECT_EQ(ParseLabelSource("clean"), LabelSource::kClean);
  EXPECT_EQ(ParseTopKRule("all"), TopKRule::kAllInTopK);
  EXPECT_THROW(ParseMapMode("macro"), ValidationError);
}

}  // namespace
}  // namespace sdtriplet
