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

#ifndef SDTRIPLET_PREDICTIONS_H_
#define SDTRIPLET_PREDICTIONS_H_

#include <map>
#include <string>
#include <vector>

#include "sdtriplet/datagen.h"

namespace sdtriplet {

// Per-frame triplet probability vectors, ordered by (video_id, frame_idx).
class PredictionSet {
 public:
  explicit PredictionSet(int num_classes = 0) : num_classes_(num_classes) {}

  // Throws ShapeError on a length mismatch and RangeError for values outside
  // [0, 1] or NaN.
  void Set(const FrameKey& key, std::vector<double> probabilities);
  const std::vector<double>& at(const FrameKey& key) const;
  bool contains(const FrameKey& key) const { return rows_.count(key) != 0; }

  int num_classes() const { return num_classes_; }
  size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }
  const std::map<FrameKey, std::vector<double>>& rows() const { return rows_; }
  std::vector<FrameKey> keys() const;

  friend bool operator==(const PredictionSet&, const PredictionSet&) = default;

 private:
  int num_classes_;
  std::map<FrameKey, std::vector<double>> rows_;
};

enum class PredictionFormat { kCsv, kJsonl };
PredictionFormat ParsePredictionFormat(const std::string& name);

// One row per frame in ascending (video_id, frame_idx) order with every
// probability printed to 9 decimal places. CSV header:
//   video_id,frame_idx,p0,...,p{C-1}
// JSONL rows: {"video_id":..,"frame_idx":..,"probs":[..]}
// An empty set raises ValidationError before any file is created.
std::string FormatPredictions(const PredictionSet& predictions,
                              PredictionFormat format);
void ExportPredictions(const PredictionSet& predictions, const std::string& path,
                       PredictionFormat format);
PredictionSet ParsePredictions(const std::string& text, PredictionFormat format,
                               const std::string& source = "<predictions>");
// Format chosen from the extension: ".jsonl" or anything else as CSV.
PredictionSet ImportPredictions(const std::string& path);

}  // namespace sdtriplet

#endif  // SDTRIPLET_PREDICTIONS_H_
