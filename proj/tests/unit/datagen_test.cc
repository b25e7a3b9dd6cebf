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


#include "sdtriplet/datagen.h"

#include <gtest/gtest.h>

#include <algorithm>

#include "sdtriplet/errors.h"
#include "support/fixtures.h"

namespace sdtriplet {
namespace {

using testing::Labels;

SyntheticSpec Spec(uint64_t seed) {
  SyntheticSpec s;
  s.n_videos = 12;
  s.frames_per_video = 40;
  s.rng_seed = seed;
  return s;
}

TEST(SyntheticDataTest, ShapeAndDeterminism) {
  const SyntheticDataset a = GenerateSyntheticDataset(Spec(3));
  const SyntheticDataset b = GenerateSyntheticDataset(Spec(3));
  const SyntheticDataset c = GenerateSyntheticDataset(Spec(4));
  EXPECT_EQ(a.manifest, b.manifest);
  EXPECT_FALSE(a.manifest == c.manifest);
  EXPECT_EQ(a.manifest.frames().size(), 480u);
  EXPECT_EQ(a.manifest.num_classes(), 20);
  EXPECT_EQ(a.manifest.videos().size(), 12u);
  EXPECT_EQ(a.manifest.videos().front(), "video_000");
}

TEST(SyntheticDataTest, EveryFrameHasOneToMaxTriplets) {
  const SyntheticDataset d = GenerateSyntheticDataset(Spec(5));
  for (const FrameRecord& f : d.manifest.frames()) {
    const int active = std::count(f.labels.begin(), f.labels.end(), 1);
    EXPECT_GE(active, 1);
    EXPECT_LE(active, 2);
    EXPECT_GE(f.phase, 0);
    EXPECT_LT(f.phase, 7);
  }
}

TEST(SyntheticDataTest, PhasesAreContiguousSegments) {
  const SyntheticDataset d = GenerateSyntheticDataset(Spec(6));
  int last_phase = -1;
  std::string last_video;
  for (const FrameRecord& f : d.manifest.frames()) {
    if (f.video_id != last_video) {
      EXPECT_EQ(f.phase, 0);
      last_video = f.video_id;
    } else {
      EXPECT_TRUE(f.phase == last_phase || f.phase == last_phase + 1);
    }
    last_phase = f.phase;
  }
}

TEST(SyntheticDataTest, PrevalenceFollowsPowerLaw) {
  SyntheticSpec s;
  s.rng_seed = 8;
  const SyntheticDataset d = GenerateSyntheticDataset(s);
  const PrevalenceTable p = ComputePrevalence(d.manifest);
  EXPECT_GT(p.front(), p.back());
  EXPECT_GE(p.front() / std::max(p.back(), 1e-9), 100.0);
  for (size_t k = 1; k < p.size(); ++k) EXPECT_LE(p[k], p[0]);
}

TEST(SyntheticDataTest, SpecValidation) {
  SyntheticSpec s;
  s.n_valid_triplets = 61;
  EXPECT_THROW(GenerateSyntheticDataset(s), ValidationError);
  s.n_valid_triplets = 20;
  s.imbalance_exponent = -1;
  EXPECT_THROW(GenerateSyntheticDataset(s), ValidationError);
}

TEST(ManifestTest, RejectsDuplicatesGapsAndBadPhases) {
  auto vocab = testing::FullVocab(1, 1, 2);
  std::vector<FrameRecord> frames(2);
  frames[0] = {"v", 0, "synth:16:1", Labels(2, {0}), 0, std::nullopt};
  frames[1] = {"v", 0, "synth:16:2", Labels(2, {1}), 0, std::nullopt};
  EXPECT_THROW(DatasetManifest(vocab, frames, 2), ValidationError);
  frames[1].frame_idx = 2;
  EXPECT_THROW(DatasetManifest(vocab, frames, 2), ValidationError);
  frames[1].frame_idx = 1;
  frames[1].phase = 2;
  EXPECT_THROW(DatasetManifest(vocab, frames, 2), ValidationError);
  frames[1].phase = 1;
  frames[1].labels = Labels(3, {});
  EXPECT_THROW(DatasetManifest(vocab, frames, 2), ShapeError);
}

TEST(ManifestTest, TextRoundTripKeepsCleanLabels) {
  const SyntheticDataset d = GenerateSyntheticDataset(testing::TinySpec(2));
  NoiseConfig nc;
  nc.rate = 0.5;
  const DatasetManifest noisy = InjectLabelNoise(d.manifest, nc);
  const std::string text = FormatManifest(noisy);
  const DatasetManifest back = ParseManifest(text, d.vocab);
  EXPECT_EQ(back, noisy);
  EXPECT_EQ(FormatManifest(back), text);
}

TEST(ManifestTest, SaveLoadResolvesVocabulary) {
  testing::TempDir dir;
  const SyntheticDataset d = GenerateSyntheticDataset(testing::TinySpec(3));
  SaveVocabulary(*d.vocab, dir.file("vocab.txt"));
  SaveManifest(d.manifest, dir.file("manifest.txt"));
  const DatasetManifest back = LoadManifest(dir.file("manifest.txt"));
  EXPECT_EQ(back, d.manifest);
  EXPECT_EQ(back.base_dir(), dir.path());
}

TEST(ManifestTest, ParseErrorCarriesLine) {
  const SyntheticDataset d = GenerateSyntheticDataset(testing::TinySpec(3));
  std::string text = FormatManifest(d.manifest);
  const size_t row = text.find("video_000,1,");
  text.replace(row, 12, "video_000,x,");
  try {
    ParseManifest(text, d.vocab, "m.txt");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 7);
  }
}

TEST(ManifestTest, SyntheticImagesRenderAtDeclaredSize) {
  const SyntheticDataset d = GenerateSyntheticDataset(testing::TinySpec(4));
  const Image img = LoadFrameImage(d.manifest, d.manifest.frames()[3]);
  EXPECT_EQ(img.height, 16);
  EXPECT_EQ(img, LoadFrameImage(d.manifest, d.manifest.frames()[3]));
}

TEST(LabelNoiseTest, ZeroRateKeepsLabelsAndRecordsCleanCopy) {
  const SyntheticDataset d = GenerateSyntheticDataset(Spec(9));
  NoiseReport report;
  const DatasetManifest out = InjectLabelNoise(d.manifest, {}, &report);
  EXPECT_EQ(report.labels_changed, 0);
  for (size_t i = 0; i < out.frames().size(); ++i) {
    EXPECT_EQ(out.frames()[i].labels, d.manifest.frames()[i].labels);
    ASSERT_TRUE(out.frames()[i].clean_labels.has_value());
    EXPECT_EQ(*out.frames()[i].clean_labels, d.manifest.frames()[i].labels);
  }
}

TEST(LabelNoiseTest, SwapMovesToOneComponentNeighbor) {
  const SyntheticDataset d = GenerateSyntheticDataset(Spec(10));
  NoiseConfig nc;
  nc.rate = 1.0;
  NoiseReport report;
  const DatasetManifest out = InjectLabelNoise(d.manifest, nc, &report);
  EXPECT_EQ(report.labels_changed + report.skipped_no_neighbor,
            report.labels_considered);
  const TripletVocabulary& v = out.vocab();
  for (const FrameRecord& f : out.frames()) {
    for (int k = 0; k < v.num_classes(); ++k) {
      if (!f.labels[k] || (*f.clean_labels)[k]) continue;
      bool adjacent = false;
      for (int j = 0; j < v.num_classes(); ++j) {
        if ((*f.clean_labels)[j] && v.ComponentMatchCount(j, k) == 2) adjacent = true;
      }
      EXPECT_TRUE(adjacent);
    }
  }
}

TEST(LabelNoiseTest, RateMatchesEmpiricalFlipFraction) {
  SyntheticSpec s;
  s.rng_seed = 11;
  const SyntheticDataset d = GenerateSyntheticDataset(s);
  NoiseConfig nc;
  nc.rate = 0.2;
  nc.mode = NoiseMode::kDropTriplet;
  NoiseReport report;
  InjectLabelNoise(d.manifest, nc, &report);
  const double frac =
      static_cast<double>(report.labels_changed) / report.labels_considered;
  EXPECT_NEAR(frac, 0.2, 0.02);
}

TEST(LabelNoiseTest, AddKeepsOriginalAndDropRemoves) {
  const SyntheticDataset d = GenerateSyntheticDataset(Spec(12));
  NoiseConfig add{1.0, NoiseMode::kAddTriplet, 1};
  NoiseConfig drop{1.0, NoiseMode::kDropTriplet, 1};
  const DatasetManifest a = InjectLabelNoise(d.manifest, add);
  const DatasetManifest b = InjectLabelNoise(d.manifest, drop);
  for (size_t i = 0; i < a.frames().size(); ++i) {
    const LabelVector& clean = d.manifest.frames()[i].labels;
    for (size_t k = 0; k < clean.size(); ++k) {
      if (clean[k]) EXPECT_EQ(a.frames()[i].labels[k], 1);
      EXPECT_EQ(b.frames()[i].labels[k], 0);
    }
  }
}

TEST(LabelNoiseTest, NoiseOnNoisyManifestKeepsOriginalCleanLabels) {
  const SyntheticDataset d = GenerateSyntheticDataset(Spec(13));
  NoiseConfig nc{0.5, NoiseMode::kSwapOneComponent, 2};
  const DatasetManifest once = InjectLabelNoise(d.manifest, nc);
  const DatasetManifest twice = InjectLabelNoise(once, nc);
  for (size_t i = 0; i < once.frames().size(); ++i) {
    EXPECT_EQ(*twice.frames()[i].clean_labels, d.manifest.frames()[i].labels);
  }
}

TEST(LabelNoiseTest, NoiseModeNamesRoundTrip) {
  for (NoiseMode m : {NoiseMode::kSwapOneComponent, NoiseMode::kDropTriplet,
                      NoiseMode::kAddTriplet}) {
    EXPECT_EQ(ParseNoiseMode(NoiseModeName(m)), m);
  }
  EXPECT_THROW(ParseNoiseMode("flip"), ValidationError);
}

TEST(FoldSplitTest, PartitionsVideosAndBalancesSizes) {
  std::vector<std::string> videos;
  for (int i = 0; i < 23; ++i) videos.push_back("v" + std::to_string(i));
  const auto folds = MakeFoldSplits(videos, 5, 17);
  ASSERT_EQ(folds.size(), 5u);
  std::set<std::string> seen;
  size_t lo = 100, hi = 0;
  for (const FoldSplit& f : folds) {
    lo = std::min(lo, f.val_videos.size());
    hi = std::max(hi, f.val_videos.size());
    EXPECT_EQ(f.train_videos.size() + f.val_videos.size(), 23u);
    for (const std::string& v : f.val_videos) {
      EXPECT_TRUE(seen.insert(v).second);
      EXPECT_EQ(f.train_videos.count(v), 0u);
    }
  }
  EXPECT_EQ(seen.size(), 23u);
  EXPECT_LE(hi - lo, 1u);
}

TEST(FoldSplitTest, SeedChangesAssignmentDeterministically) {
  std::vector<std::string> videos;
  for (int i = 0; i < 20; ++i) videos.push_back("v" + std::to_string(i));
  const auto a = MakeFoldSplits(videos, 4, 1);
  const auto b = MakeFoldSplits(videos, 4, 1);
  const auto c = MakeFoldSplits(videos, 4, 2);
  EXPECT_EQ(FormatFoldSplits(a), FormatFoldSplits(b));
  EXPECT_NE(FormatFoldSplits(a), FormatFoldSplits(c));
}

TEST(FoldSplitTest, TextRoundTrip) {
  std::vector<std::string> videos = {"a", "b", "c", "d", "e"};
  const auto folds = MakeFoldSplits(videos, 2, 3);
  const auto back = ParseFoldSplits(FormatFoldSplits(folds));
  ASSERT_EQ(back.size(), 2u);
  for (int k = 0; k < 2; ++k) {
    EXPECT_EQ(back[k].val_videos, folds[k].val_videos);
    EXPECT_EQ(back[k].train_videos, folds[k].train_videos);
  }
}

TEST(FoldSplitTest, TooFewVideosRejected) {
  EXPECT_THROW(MakeFoldSplits({"a", "b"}, 3, 1), ValidationError);
  EXPECT_THROW(MakeFoldSplits({"a", "b"}, 1, 1), ValidationError);
}

}  // namespace
}  // namespace sdtriplet
