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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "sdtriplet/errors.h"

namespace sdtriplet {

std::optional<double> AveragePrecision(std::span<const double> scores,
                                       std::span<const uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw ShapeError("scores and labels differ in length");
  }
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  double sum = 0.0;
  int64_t hits = 0;
  for (size_t rank = 0; rank < order.size(); ++rank) {
    if (labels[order[rank]]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  if (hits == 0) return std::nullopt;
  return sum / static_cast<double>(hits);
}

MapMode ParseMapMode(const std::string& name) {
  if (name == "global") return MapMode::kGlobal;
  if (name == "per_video") return MapMode::kPerVideo;
  throw ValidationError("unknown mAP mode '" + name + "'");
}

LabelSource ParseLabelSource(const std::string& name) {
  if (name == "observed") return LabelSource::kObserved;
  if (name == "clean") return LabelSource::kClean;
  throw ValidationError("unknown label source '" + name + "'");
}

TopKRule ParseTopKRule(const std::string& name) {
  if (name == "any") return TopKRule::kAnyInTopK;
  if (name == "all") return TopKRule::kAllInTopK;
  throw ValidationError("unknown top-k rule '" + name + "'");
}

namespace {

double MeanOfDefined(const std::vector<std::optional<double>>& values,
                     bool undefined_as_zero, int* excluded) {
  double sum = 0.0;
  int count = 0;
  *excluded = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++count;
    } else if (undefined_as_zero) {
      ++count;
    } else {
      ++*excluded;
    }
  }
  return count ? sum / count : std::nan("");
}

const LabelVector& LabelsFor(const FrameRecord& f, LabelSource source) {
  return source == LabelSource::kClean ? f.reference_labels() : f.labels;
}

struct Gathered {
  std::vector<std::vector<double>> scores;
  std::vector<LabelVector> labels;
  std::vector<std::string> videos;
};

Gathered Gather(const PredictionSet& predictions, const DatasetManifest& manifest,
                LabelSource source) {
  if (predictions.num_classes() != manifest.num_classes()) {
    throw ShapeError("prediction width differs from the vocabulary size");
  }
  Gathered g;
  for (const auto& [key, probs] : predictions.rows()) {
    const FrameRecord& f = manifest.at(key);
    g.scores.push_back(probs);
    g.labels.push_back(LabelsFor(f, source));
    g.videos.push_back(key.first);
  }
  return g;
}

}  // namespace

MapResult MeanAveragePrecision(const std::vector<std::vector<double>>& scores,
                               const std::vector<LabelVector>& labels,
                               MapMode mode, bool undefined_as_zero,
                               const std::vector<std::string>* groups) {
  if (scores.size() != labels.size()) {
    throw ShapeError("score and label frame counts differ");
  }
  if (mode == MapMode::kPerVideo && (!groups || groups->size() != scores.size())) {
    throw ShapeError("per-video mode needs one group per frame");
  }
  const size_t n = scores.size();
  const size_t c = n ? scores[0].size() : 0;
  for (size_t i = 0; i < n; ++i) {
    if (scores[i].size() != c || labels[i].size() != c) {
      throw ShapeError("ragged score or label rows");
    }
  }
  MapResult result;
  result.per_class.resize(c);
  std::vector<double> column(n);
  std::vector<uint8_t> truth(n);
  if (mode == MapMode::kGlobal) {
    for (size_t k = 0; k < c; ++k) {
      for (size_t i = 0; i < n; ++i) {
        column[i] = scores[i][k];
        truth[i] = labels[i][k];
      }
      result.per_class[k] = AveragePrecision(column, truth);
    }
  } else {
    std::map<std::string, std::vector<size_t>> members;
    for (size_t i = 0; i < n; ++i) members[(*groups)[i]].push_back(i);
    for (size_t k = 0; k < c; ++k) {
      double sum = 0.0;
      int defined = 0;
      for (const auto& [group, rows] : members) {
        std::vector<double> s;
        std::vector<uint8_t> t;
        for (size_t i : rows) {
          s.push_back(scores[i][k]);
          t.push_back(labels[i][k]);
        }
        if (const auto ap = AveragePrecision(s, t)) {
          sum += *ap;
          ++defined;
        }
      }
      if (defined) result.per_class[k] = sum / defined;
    }
  }
  result.map = MeanOfDefined(result.per_class, undefined_as_zero,
                             &result.excluded_classes);
  return result;
}

MapResult TripletMap(const PredictionSet& predictions,
                     const DatasetManifest& manifest,
                     const MetricOptions& options) {
  const Gathered g = Gather(predictions, manifest, options.labels);
  return MeanAveragePrecision(g.scores, g.labels, options.mode,
                              options.undefined_as_zero, &g.videos);
}

const char* ComponentName(Component component) {
  switch (component) {
    case Component::kInstrument:
      return "instrument";
    case Component::kVerb:
      return "verb";
    case Component::kTarget:
      return "target";
  }
  return "?";
}

namespace {

int ComponentOf(const Triplet& t, Component component) {
  switch (component) {
    case Component::kInstrument:
      return t.instrument;
    case Component::kVerb:
      return t.verb;
    case Component::kTarget:
      return t.target;
  }
  return 0;
}

int ComponentCount(const TripletVocabulary& vocab, Component component) {
  switch (component) {
    case Component::kInstrument:
      return vocab.num_instruments();
    case Component::kVerb:
      return vocab.num_verbs();
    case Component::kTarget:
      return vocab.num_targets();
  }
  return 0;
}

}  // namespace

std::vector<double> ProjectToComponent(std::span<const double> triplet_scores,
                                       const TripletVocabulary& vocab,
                                       Component component) {
  if (static_cast<int>(triplet_scores.size()) != vocab.num_classes()) {
    throw ShapeError("triplet score vector length mismatch");
  }
  std::vector<double> out(ComponentCount(vocab, component), 0.0);
  for (int k = 0; k < vocab.num_classes(); ++k) {
    double& slot = out[ComponentOf(vocab.Decompose(k), component)];
    slot = std::max(slot, triplet_scores[k]);
  }
  return out;
}

MapResult DisentangledComponentMap(const PredictionSet& predictions,
                                   const DatasetManifest& manifest,
                                   Component component,
                                   const MetricOptions& options) {
  const Gathered g = Gather(predictions, manifest, options.labels);
  const TripletVocabulary& vocab = manifest.vocab();
  std::vector<std::vector<double>> scores;
  std::vector<LabelVector> labels;
  for (size_t i = 0; i < g.scores.size(); ++i) {
    scores.push_back(ProjectToComponent(g.scores[i], vocab, component));
    const ComponentLabels cl = vocab.ComponentMultiHot(g.labels[i]);
    switch (component) {
      case Component::kInstrument:
        labels.push_back(cl.instrument);
        break;
      case Component::kVerb:
        labels.push_back(cl.verb);
        break;
      case Component::kTarget:
        labels.push_back(cl.target);
        break;
    }
  }
  return MeanAveragePrecision(scores, labels, options.mode,
                              options.undefined_as_zero, &g.videos);
}

std::vector<int> TopKClasses(std::span<const double> scores, int k) {
  if (k < 1 || k > static_cast<int>(scores.size())) {
    throw RangeError("K=" + std::to_string(k) + " outside [1, " +
                     std::to_string(scores.size()) + "]");
  }
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](int a, int b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  order.resize(k);
  return order;
}

std::optional<double> TopKAccuracy(const PredictionSet& predictions,
                                   const DatasetManifest& manifest,
                                   const MetricOptions& options) {
  if (options.top_k < 1 || options.top_k > manifest.num_classes()) {
    throw RangeError("K=" + std::to_string(options.top_k) + " outside [1, C]");
  }
  int64_t scored = 0, hits = 0;
  for (const auto& [key, probs] : predictions.rows()) {
    const LabelVector& truth = LabelsFor(manifest.at(key), options.labels);
    const int positives = std::accumulate(truth.begin(), truth.end(), 0);
    if (positives == 0) continue;
    ++scored;
    int found = 0;
    for (int c : TopKClasses(probs, options.top_k)) found += truth[c] != 0;
    const bool hit = options.top_k_rule == TopKRule::kAnyInTopK
                         ? found > 0
                         : found == positives;
    hits += hit;
  }
  if (scored == 0) return std::nullopt;
  return static_cast<double>(hits) / static_cast<double>(scored);
}

std::map<std::string, std::optional<double>> PerVideoReport(
    const PredictionSet& predictions, const DatasetManifest& manifest,
    const MetricOptions& options) {
  const Gathered g = Gather(predictions, manifest, options.labels);
  std::map<std::string, std::pair<std::vector<std::vector<double>>,
                                  std::vector<LabelVector>>>
      by_video;
  for (size_t i = 0; i < g.scores.size(); ++i) {
    by_video[g.videos[i]].first.push_back(g.scores[i]);
    by_video[g.videos[i]].second.push_back(g.labels[i]);
  }
  std::map<std::string, std::optional<double>> table;
  for (const auto& [video, data] : by_video) {
    const MapResult r = MeanAveragePrecision(data.first, data.second,
                                             MapMode::kGlobal,
                                             options.undefined_as_zero);
    table[video] = std::isnan(r.map) ? std::nullopt : std::optional<double>(r.map);
  }
  return table;
}

std::vector<std::pair<std::string, std::optional<double>>> SortPerVideo(
    const std::map<std::string, std::optional<double>>& table) {
  std::vector<std::pair<std::string, std::optional<double>>> rows(table.begin(),
                                                                  table.end());
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.second.has_value() != b.second.has_value()) return a.second.has_value();
    if (!a.second) return false;
    return *a.second > *b.second;
  });
  return rows;
}

EvalReport Evaluate(const PredictionSet& predictions,
                    const DatasetManifest& manifest,
                    const MetricOptions& options) {
  EvalReport report;
  report.num_frames = predictions.size();
  report.triplet = TripletMap(predictions, manifest, options);
  for (Component c : {Component::kInstrument, Component::kVerb, Component::kTarget}) {
    report.components[c] = DisentangledComponentMap(predictions, manifest, c, options);
  }
  report.k = options.top_k;
  report.top_k = TopKAccuracy(predictions, manifest, options);
  report.per_video = PerVideoReport(predictions, manifest, options);
  return report;
}

namespace {

nlohmann::json OptionalJson(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json();
}

nlohmann::json MapJson(const MapResult& r) {
  nlohmann::json per_class = nlohmann::json::array();
  for (const auto& v : r.per_class) per_class.push_back(OptionalJson(v));
  return {{"map", std::isnan(r.map) ? nlohmann::json() : nlohmann::json(r.map)},
          {"per_class_ap", per_class},
          {"excluded_classes", r.excluded_classes}};
}

}  // namespace

std::string EvalReportToJson(const EvalReport& report) {
  nlohmann::json j;
  j["num_frames"] = report.num_frames;
  j["triplet"] = MapJson(report.triplet);
  for (const auto& [c, r] : report.components) j["components"][ComponentName(c)] = MapJson(r);
  j["top_k"] = {{"k", report.k}, {"accuracy", OptionalJson(report.top_k)}};
  nlohmann::json videos = nlohmann::json::array();
  for (const auto& [video, map] : SortPerVideo(report.per_video)) {
    videos.push_back({{"video_id", video}, {"map", OptionalJson(map)}});
  }
  j["per_video"] = videos;
  return j.dump(2) + "\n";
}

std::string PerVideoTableCsv(const std::map<std::string, std::optional<double>>& table) {
  std::string out = "video_id,map\n";
  char buf[32];
  for (const auto& [video, map] : SortPerVideo(table)) {
    out += video + ",";
    if (map) {
      std::snprintf(buf, sizeof(buf), "%.9f", *map);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace sdtriplet
