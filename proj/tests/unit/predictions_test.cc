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


#include "sdtriplet/predictions.h"

#include <gtest/gtest.h>

#include <filesystem>

#include "sdtriplet/errors.h"
#include "sdtriplet/util.h"
#include "support/fixtures.h"

namespace sdtriplet {
namespace {

PredictionSet Sample() {
  PredictionSet p(3);
  p.Set({"video_b", 0}, {0.1, 0.2, 0.3});
  p.Set({"video_a", 1}, {1.0, 0.0, 0.123456789});
  p.Set({"video_a", 0}, {0.5, 0.25, 0.125});
  return p;
}

TEST(PredictionSetTest, RowsOrderedByVideoThenFrame) {
  const auto keys = Sample().keys();
  ASSERT_EQ(keys.size(), 3u);
  EXPECT_EQ(keys[0], (FrameKey{"video_a", 0}));
  EXPECT_EQ(keys[1], (FrameKey{"video_a", 1}));
  EXPECT_EQ(keys[2], (FrameKey{"video_b", 0}));
}

TEST(PredictionSetTest, SetValidatesShapeAndRange) {
  PredictionSet p(2);
  EXPECT_THROW(p.Set({"v", 0}, {0.1}), ShapeError);
  EXPECT_THROW(p.Set({"v", 0}, {0.1, 1.5}), RangeError);
  EXPECT_THROW(p.Set({"v", 0}, {0.1, std::nan("")}), RangeError);
  EXPECT_THROW(p.at({"v", 0}), CoverageError);
}

TEST(PredictionExportTest, CsvLayout) {
  const std::string csv = FormatPredictions(Sample(), PredictionFormat::kCsv);
  EXPECT_EQ(csv,
            "video_id,frame_idx,p0,p1,p2\n"
            "video_a,0,0.500000000,0.250000000,0.125000000\n"
            "video_a,1,1.000000000,0.000000000,0.123456789\n"
            "video_b,0,0.100000000,0.200000000,0.300000000\n");
}

TEST(PredictionExportTest, JsonlRoundTrip) {
  const PredictionSet p = Sample();
  const std::string text = FormatPredictions(p, PredictionFormat::kJsonl);
  const PredictionSet back = ParsePredictions(text, PredictionFormat::kJsonl);
  EXPECT_EQ(back.keys(), p.keys());
  for (const auto& key : p.keys()) {
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(back.at(key)[c], p.at(key)[c], 5e-10);
  }
  EXPECT_EQ(FormatPredictions(back, PredictionFormat::kJsonl), text);
}

TEST(PredictionExportTest, FileExtensionSelectsFormat) {
  testing::TempDir dir;
  const PredictionSet p = Sample();
  ExportPredictions(p, dir.file("p.jsonl"), PredictionFormat::kJsonl);
  ExportPredictions(p, dir.file("p.csv"), PredictionFormat::kCsv);
  EXPECT_EQ(ImportPredictions(dir.file("p.jsonl")), ImportPredictions(dir.file("p.csv")));
}

TEST(PredictionExportTest, EmptySetRefusedWithoutCreatingFile) {
  testing::TempDir dir;
  EXPECT_THROW(ExportPredictions(PredictionSet(3), dir.file("e.csv"),
                                 PredictionFormat::kCsv),
               ValidationError);
  EXPECT_FALSE(std::filesystem::exists(dir.file("e.csv")));
}

TEST(PredictionExportTest, ParseErrorsCarryLineNumbers) {
  const std::string bad = "video_id,frame_idx,p0\nv,0,0.5\nv,1,abc\n";
  try {
    ParsePredictions(bad, PredictionFormat::kCsv, "p.csv");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
  }
  const std::string dup = "video_id,frame_idx,p0\nv,0,0.5\nv,0,0.5\n";
  EXPECT_THROW(ParsePredictions(dup, PredictionFormat::kCsv), ParseError);
  const std::string range = "video_id,frame_idx,p0\nv,0,1.5\n";
  EXPECT_THROW(ParsePredictions(range, PredictionFormat::kCsv), ParseError);
}

TEST(PredictionExportTest, FormatNames) {
  EXPECT_EQ(ParsePredictionFormat("csv"), PredictionFormat::kCsv);
  EXPECT_EQ(ParsePredictionFormat("jsonl"), PredictionFormat::kJsonl);
  EXPECT_THROW(ParsePredictionFormat("xml"), ValidationError);
}

}  // namespace
}  // namespace sdtriplet
