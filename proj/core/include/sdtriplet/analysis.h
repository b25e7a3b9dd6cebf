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

#ifndef SDTRIPLET_ANALYSIS_H_
#define SDTRIPLET_ANALYSIS_H_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sdtriplet/datagen.h"
#include "sdtriplet/metrics.h"
#include "sdtriplet/soft_labels.h"

namespace sdtriplet {

// Indices of frames carrying exactly one triplet.
std::vector<size_t> SelectSingleTripletFrames(
    const DatasetManifest& manifest, LabelSource labels = LabelSource::kObserved);

// The five highest-scored classes other than `reference`, ties by ascending
// class id. RangeError when fewer than six classes exist.
std::array<int, 5> Top5ExcludingReference(std::span<const double> scores,
                                          int reference);

struct MeanWithError {
  double mean = 0.0;
  double standard_error = 0.0;  // sample sd / sqrt(n); NaN when n < 2
  size_t n = 0;
};

MeanWithError Summarize(std::span<const double> values);

struct FrameSimilarity {
  FrameKey key;
  int reference = 0;
  std::array<int, 5> top5{};
  std::array<double, 5> scores{};
  std::array<int, 5> matches{};
  double mean_match = 0.0;
};

struct ObservedSimilarity {
  MeanWithError stats;
  std::vector<FrameSimilarity> frames;
};

// Mean component match between each frame's reference triplet and its top-5
// soft-label triplets. CoverageError when a frame has no soft labels.
ObservedSimilarity MeanComponentMatch(const std::vector<size_t>& frames,
                                      const DatasetManifest& manifest,
                                      const SoftLabelSet& soft,
                                      LabelSource labels = LabelSource::kObserved);

struct BaselineOptions {
  int n_draws = 5;
  bool with_replacement = false;
  uint64_t rng_seed = 1;
};

// For each reference class, draws classes (reference excluded) with
// probability proportional to prevalence and averages their component match.
// ValidationError when fewer than six classes have positive prevalence.
MeanWithError PrevalenceRandomBaseline(const std::vector<int>& references,
                                       const PrevalenceTable& prevalence,
                                       const TripletVocabulary& vocab,
                                       const BaselineOptions& options = {});

struct SimilarityReport {
  MeanWithError observed;
  MeanWithError baseline;
  size_t num_frames = 0;
  // (observed - baseline) / sqrt(se_obs^2 + se_base^2)
  double separation = 0.0;
  std::vector<FrameSimilarity> frames;
};

// Restricts to single-triplet frames covered by `soft`; prevalence is taken
// from the observed labels of the whole manifest.
SimilarityReport AnalyzeSoftLabels(const DatasetManifest& manifest,
                                   const SoftLabelSet& soft,
                                   const BaselineOptions& options = {},
                                   LabelSource labels = LabelSource::kObserved);

std::string SimilarityReportToJson(const SimilarityReport& report);
// video_id,frame_idx,reference,top1..top5,score1..score5,match1..match5,mean
// with class names in "i,v,t" form quoted.
std::string SimilarityDetailCsv(const SimilarityReport& report,
                                const TripletVocabulary& vocab);

}  // namespace sdtriplet

#endif  // SDTRIPLET_ANALYSIS_H_
