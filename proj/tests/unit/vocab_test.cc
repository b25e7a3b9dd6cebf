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


#include "sdtriplet/vocab.h"

#include <gtest/gtest.h>

#include "sdtriplet/errors.h"
#include "support/fixtures.h"

namespace sdtriplet {
namespace {

TripletVocabulary SmallVocab() {
  ComponentVocabulary c{{"grasper", "hook"}, {"retract", "dissect", "coagulate"},
                        {"gallbladder", "liver"}};
  return TripletVocabulary(c, {{0, 0, 0}, {1, 1, 0}, {1, 2, 1}, {0, 1, 1}});
}

TEST(VocabularyTest, ComposeDecomposeRoundTrip) {
  const TripletVocabulary v = TripletVocabulary::Full(3, 4, 5);
  ASSERT_EQ(v.num_classes(), 60);
  for (int c = 0; c < v.num_classes(); ++c) {
    const Triplet t = v.Decompose(c);
    EXPECT_EQ(v.Compose(t.instrument, t.verb, t.target), c);
  }
}

TEST(VocabularyTest, ComposeOfInvalidTupleIsEmpty) {
  const TripletVocabulary v = SmallVocab();
  EXPECT_FALSE(v.Compose(0, 2, 0).has_value());
  EXPECT_EQ(v.Compose(1, 2, 1), 2);
  EXPECT_EQ(v.FindByName("hook", "dissect", "gallbladder"), 1);
  EXPECT_FALSE(v.FindByName("hook", "cut", "liver").has_value());
}

TEST(VocabularyTest, DecomposeOutOfRangeThrows) {
  const TripletVocabulary v = SmallVocab();
  EXPECT_THROW(v.Decompose(4), IndexError);
  EXPECT_THROW(v.Decompose(-1), IndexError);
}

TEST(VocabularyTest, DuplicateTupleRejected) {
  ComponentVocabulary c{{"a"}, {"b"}, {"c", "d"}};
  EXPECT_THROW(TripletVocabulary(c, {{0, 0, 0}, {0, 0, 0}}), ValidationError);
  EXPECT_THROW(TripletVocabulary(c, {{0, 0, 2}}), ValidationError);
}

TEST(VocabularyTest, ComponentMultiHotIsOrOfActiveTriplets) {
  const TripletVocabulary v = SmallVocab();
  const ComponentLabels m = v.ComponentMultiHot(testing::Labels(4, {1, 3}));
  EXPECT_EQ(m.instrument, (LabelVector{1, 1}));
  EXPECT_EQ(m.verb, (LabelVector{0, 1, 0}));
  EXPECT_EQ(m.target, (LabelVector{1, 1}));
  const ComponentLabels empty = v.ComponentMultiHot(testing::Labels(4, {}));
  EXPECT_EQ(empty.instrument, (LabelVector{0, 0}));
}

TEST(VocabularyTest, ComponentMatchCount) {
  const TripletVocabulary v = SmallVocab();
  EXPECT_EQ(v.ComponentMatchCount(0, 0), 3);
  EXPECT_EQ(v.ComponentMatchCount(1, 2), 1);  // same instrument
  EXPECT_EQ(v.ComponentMatchCount(0, 2), 0);
  EXPECT_EQ(v.ComponentMatchCount(3, 2), 1);  // same target
}

TEST(VocabularyTest, OneComponentNeighbors) {
  const TripletVocabulary v = TripletVocabulary::Full(2, 2, 2);
  const auto n = v.OneComponentNeighbors(0);
  EXPECT_EQ(n.size(), 3u);
  for (int k : n) EXPECT_EQ(v.ComponentMatchCount(0, k), 2);
}

TEST(VocabularyTest, TextFormatRoundTrip) {
  const TripletVocabulary v = SmallVocab();
  const std::string text = FormatVocabulary(v);
  EXPECT_EQ(ParseVocabulary(text), v);
  EXPECT_EQ(FormatVocabulary(ParseVocabulary(text)), text);
}

TEST(VocabularyTest, ParseReportsLine) {
  const std::string text =
      "sdtriplet-vocab 1\ninstruments 1\na\nverbs 1\nb\ntargets 1\nc\n"
      "triplets 1\n1,0,0,0\n";
  try {
    ParseVocabulary(text, "v.txt");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 9);
    EXPECT_NE(std::string(e.what()).find("v.txt:9"), std::string::npos);
  }
}

TEST(VocabularyTest, PrevalenceCountsFrames) {
  std::vector<LabelVector> frames = {testing::Labels(3, {0}),
                                     testing::Labels(3, {0, 2}),
                                     testing::Labels(3, {}),
                                     testing::Labels(3, {0})};
  const PrevalenceTable p = ComputePrevalence(frames, 3);
  EXPECT_DOUBLE_EQ(p[0], 0.75);
  EXPECT_DOUBLE_EQ(p[1], 0.0);
  EXPECT_DOUBLE_EQ(p[2], 0.25);
}

}  // namespace
}  // namespace sdtriplet
