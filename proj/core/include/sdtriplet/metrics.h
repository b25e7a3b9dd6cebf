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

#ifndef SDTRIPLET_METRICS_H_
#define SDTRIPLET_METRICS_H_

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sdtriplet/datagen.h"
#include "sdtriplet/predictions.h"

namespace sdtriplet {

// Ranks by descending score, ties by ascending index, and averages
// precision@k over the ranks k holding a positive. nullopt when there are no
// positives.
std::optional<double> AveragePrecision(std::span<const double> scores,
                                       std::span<const uint8_t> labels);

enum class MapMode { kGlobal, kPerVideo };
enum class LabelSource { kObserved, kClean };
enum class TopKRule { kAnyInTopK, kAllInTopK };

MapMode ParseMapMode(const std::string& name);
LabelSource ParseLabelSource(const std::string& name);
TopKRule ParseTopKRule(const std::string& name);

struct MetricOptions {
  MapMode mode = MapMode::kGlobal;
  // Strict mode scores classes without positives as 0 instead of excluding
  // them from the mean.
  bool undefined_as_zero = false;
  LabelSource labels = LabelSource::kObserved;
  int top_k = 5;
  TopKRule top_k_rule = TopKRule::kAnyInTopK;
};

struct MapResult {
  double map = 0.0;  // NaN when no class is defined
  std::vector<std::optional<double>> per_class;
  int excluded_classes = 0;
};

// Column-oriented scores: scores[frame][class], labels[frame][class].
// `groups` optionally assigns each frame a group (video) for per-video mode.
MapResult MeanAveragePrecision(const std::vector<std::vector<double>>& scores,
                               const std::vector<LabelVector>& labels,
                               MapMode mode, bool undefined_as_zero,
                               const std::vector<std::string>* groups = nullptr);

// Evaluates over the frames present in `predictions`; each must exist in the
// manifest.
MapResult TripletMap(const PredictionSet& predictions,
                     const DatasetManifest& manifest,
                     const MetricOptions& options = {});

enum class Component { kInstrument, kVerb, kTarget };
const char* ComponentName(Component component);

// Component score = max over triplet scores whose decomposition contains the
// component.
std::vector<double> ProjectToComponent(std::span<const double> triplet_scores,
                                       const TripletVocabulary& vocab,
                                       Component component);
MapResult DisentangledComponentMap(const PredictionSet& predictions,
                                   const DatasetManifest& manifest,
                                   Component component,
                                   const MetricOptions& options = {});

// Fraction of frames (with >= 1 ground-truth triplet) that hit. Ties at the
// K-th score resolve by ascending class id. nullopt when no frame is scored.
std::optional<double> TopKAccuracy(const PredictionSet& predictions,
                                   const DatasetManifest& manifest,
                                   const MetricOptions& options = {});
std::vector<int> TopKClasses(std::span<const double> scores, int k);

// Global-mode triplet mAP restricted to each video's frames.
std::map<std::string, std::optional<double>> PerVideoReport(
    const PredictionSet& predictions, const DatasetManifest& manifest,
    const MetricOptions& options = {});
// Defined entries sorted by descending mAP (ties by video id), then undefined.
std::vector<std::pair<std::string, std::optional<double>>> SortPerVideo(
    const std::map<std::string, std::optional<double>>& table);

struct EvalReport {
  MapResult triplet;
  std::map<Component, MapResult> components;
  std::optional<double> top_k;
  int k = 5;
  std::map<std::string, std::optional<double>> per_video;
  size_t num_frames = 0;
};

EvalReport Evaluate(const PredictionSet& predictions,
                    const DatasetManifest& manifest,
                    const MetricOptions& options = {});

std::string EvalReportToJson(const EvalReport& report);
// "video_id,map" rows sorted as in SortPerVideo; undefined entries are blank.
std::string PerVideoTableCsv(const std::map<std::string, std::optional<double>>& table);

}  // namespace sdtriplet

#endif  // SDTRIPLET_METRICS_H_
