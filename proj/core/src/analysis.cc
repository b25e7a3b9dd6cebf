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

#include "sdtriplet/analysis.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>

#include "json.hpp"
#include "sdtriplet/errors.h"
#include "sdtriplet/image.h"

namespace sdtriplet {

std::vector<size_t> SelectSingleTripletFrames(const DatasetManifest& manifest,
                                              LabelSource labels) {
  std::vector<size_t> out;
  const auto& frames = manifest.frames();
  for (size_t i = 0; i < frames.size(); ++i) {
    const LabelVector& l = labels == LabelSource::kClean
                               ? frames[i].reference_labels()
                               : frames[i].labels;
    if (std::count(l.begin(), l.end(), uint8_t{1}) == 1) out.push_back(i);
  }
  return out;
}

std::array<int, 5> Top5ExcludingReference(std::span<const double> scores,
                                          int reference) {
  const int n = static_cast<int>(scores.size());
  if (n < 6) throw RangeError("top-5 excluding the reference needs >= 6 classes");
  if (reference < 0 || reference >= n) throw IndexError("reference class out of range");
  std::vector<int> order;
  order.reserve(n - 1);
  for (int c = 0; c < n; ++c) {
    if (c != reference) order.push_back(c);
  }
  std::partial_sort(order.begin(), order.begin() + 5, order.end(), [&](int a, int b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  });
  std::array<int, 5> top;
  std::copy_n(order.begin(), 5, top.begin());
  return top;
}

MeanWithError Summarize(std::span<const double> values) {
  MeanWithError s;
  s.n = values.size();
  if (values.empty()) {
    s.mean = s.standard_error = std::nan("");
    return s;
  }
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  if (values.size() < 2) {
    s.standard_error = std::nan("");
    return s;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.standard_error =
      std::sqrt(ss / static_cast<double>(values.size() - 1)) /
      std::sqrt(static_cast<double>(values.size()));
  return s;
}

namespace {

int SingleLabel(const LabelVector& labels) {
  const auto it = std::find(labels.begin(), labels.end(), uint8_t{1});
  if (it == labels.end() || std::count(labels.begin(), labels.end(), uint8_t{1}) != 1) {
    throw ValidationError("frame does not carry exactly one triplet");
  }
  return static_cast<int>(it - labels.begin());
}

}  // namespace

ObservedSimilarity MeanComponentMatch(const std::vector<size_t>& frames,
                                      const DatasetManifest& manifest,
                                      const SoftLabelSet& soft,
                                      LabelSource labels) {
  const TripletVocabulary& vocab = manifest.vocab();
  ObservedSimilarity out;
  std::vector<size_t> missing;
  std::vector<double> means;
  for (size_t i : frames) {
    const FrameRecord& f = manifest.frames().at(i);
    const auto it = soft.triplet.find(f.key());
    if (it == soft.triplet.end()) {
      missing.push_back(i);
      continue;
    }
    FrameSimilarity fs;
    fs.key = f.key();
    fs.reference = SingleLabel(labels == LabelSource::kClean ? f.reference_labels()
                                                            : f.labels);
    fs.top5 = Top5ExcludingReference(it->second, fs.reference);
    int total = 0;
    for (int k = 0; k < 5; ++k) {
      fs.scores[k] = it->second[fs.top5[k]];
      fs.matches[k] = vocab.ComponentMatchCount(fs.reference, fs.top5[k]);
      total += fs.matches[k];
    }
    fs.mean_match = total / 5.0;
    means.push_back(fs.mean_match);
    out.frames.push_back(fs);
  }
  if (!missing.empty()) {
    const FrameKey k = manifest.frames()[missing.front()].key();
    throw CoverageError("soft labels missing for " + std::to_string(missing.size()) +
                        " analysed frames, first " + k.first + "/" +
                        std::to_string(k.second));
  }
  out.stats = Summarize(means);
  return out;
}

MeanWithError PrevalenceRandomBaseline(const std::vector<int>& references,
                                       const PrevalenceTable& prevalence,
                                       const TripletVocabulary& vocab,
                                       const BaselineOptions& options) {
  const int n = vocab.num_classes();
  if (static_cast<int>(prevalence.size()) != n) {
    throw ShapeError("prevalence table does not match the vocabulary");
  }
  if (options.n_draws < 1) throw ValidationError("n_draws must be >= 1");
  const int positive = static_cast<int>(
      std::count_if(prevalence.begin(), prevalence.end(), [](double p) { return p > 0; }));
  if (positive < 6) {
    throw ValidationError("baseline needs >= 6 classes with positive prevalence, got " +
                          std::to_string(positive));
  }
  std::mt19937_64 rng(options.rng_seed);
  std::vector<double> means;
  means.reserve(references.size());
  std::vector<double> weights(n);
  for (int ref : references) {
    if (ref < 0 || ref >= n) throw IndexError("reference class out of range");
    for (int c = 0; c < n; ++c) weights[c] = c == ref ? 0.0 : std::max(prevalence[c], 0.0);
    int total_match = 0;
    for (int d = 0; d < options.n_draws; ++d) {
      const double mass = std::accumulate(weights.begin(), weights.end(), 0.0);
      if (!(mass > 0.0)) throw ValidationError("not enough classes left to draw from");
      const double u = UniformUnit(rng) * mass;
      double acc = 0.0;
      int pick = -1;
      for (int c = 0; c < n; ++c) {
        if (weights[c] <= 0.0) continue;
        acc += weights[c];
        pick = c;
        if (u < acc) break;
      }
      total_match += vocab.ComponentMatchCount(ref, pick);
      if (!options.with_replacement) weights[pick] = 0.0;
    }
    means.push_back(static_cast<double>(total_match) / options.n_draws);
  }
  return Summarize(means);
}

SimilarityReport AnalyzeSoftLabels(const DatasetManifest& manifest,
                                   const SoftLabelSet& soft,
                                   const BaselineOptions& options,
                                   LabelSource labels) {
  if (soft.num_classes != manifest.num_classes()) {
    throw ShapeError("soft labels do not match the manifest class count");
  }
  std::vector<size_t> frames;
  for (size_t i : SelectSingleTripletFrames(manifest, labels)) {
    if (soft.triplet.count(manifest.frames()[i].key())) frames.push_back(i);
  }
  ObservedSimilarity observed = MeanComponentMatch(frames, manifest, soft, labels);
  std::vector<int> references;
  for (const FrameSimilarity& f : observed.frames) references.push_back(f.reference);

  SimilarityReport report;
  report.observed = observed.stats;
  report.baseline = PrevalenceRandomBaseline(
      references, ComputePrevalence(manifest), manifest.vocab(), options);
  report.num_frames = observed.frames.size();
  const double se = std::hypot(report.observed.standard_error,
                               report.baseline.standard_error);
  report.separation = (report.observed.mean - report.baseline.mean) / se;
  report.frames = std::move(observed.frames);
  return report;
}

namespace {

nlohmann::json StatsJson(const MeanWithError& s) {
  const auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); };
  return {{"mean", num(s.mean)}, {"standard_error", num(s.standard_error)}, {"n", s.n}};
}

}  // namespace

std::string SimilarityReportToJson(const SimilarityReport& report) {
  nlohmann::json j;
  j["observed"] = StatsJson(report.observed);
  j["baseline"] = StatsJson(report.baseline);
  j["num_frames"] = report.num_frames;
  j["separation"] = std::isfinite(report.separation) ? nlohmann::json(report.separation)
                                                     : nlohmann::json();
  return j.dump(2) + "\n";
}

std::string SimilarityDetailCsv(const SimilarityReport& report,
                                const TripletVocabulary& vocab) {
  std::string out = "video_id,frame_idx,reference";
  for (int k = 1; k <= 5; ++k) out += ",top" + std::to_string(k);
  for (int k = 1; k <= 5; ++k) out += ",score" + std::to_string(k);
  for (int k = 1; k <= 5; ++k) out += ",match" + std::to_string(k);
  out += ",mean_match\n";
  char buf[64];
  for (const FrameSimilarity& f : report.frames) {
    out += f.key.first + "," + std::to_string(f.key.second) + ",\"" +
           vocab.ClassName(f.reference) + "\"";
    for (int c : f.top5) out += ",\"" + vocab.ClassName(c) + "\"";
    for (double s : f.scores) {
      std::snprintf(buf, sizeof(buf), ",%.6f", s);
      out += buf;
    }
    for (int m : f.matches) out += "," + std::to_string(m);
    std::snprintf(buf, sizeof(buf), ",%.1f\n", f.mean_match);
    out += buf;
  }
  return out;
}

}  // namespace sdtriplet
