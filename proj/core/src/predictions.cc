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

#include <charconv>
#include <cmath>
#include <cstdio>

#include "json.hpp"
#include "sdtriplet/errors.h"
#include "sdtriplet/util.h"

namespace sdtriplet {

void PredictionSet::Set(const FrameKey& key, std::vector<double> probabilities) {
  if (static_cast<int>(probabilities.size()) != num_classes_) {
    throw ShapeError("prediction for " + key.first + "/" +
                     std::to_string(key.second) + " has " +
                     std::to_string(probabilities.size()) + " values, expected " +
                     std::to_string(num_classes_));
  }
  for (double p : probabilities) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw RangeError("prediction value outside [0, 1] for " + key.first + "/" +
                       std::to_string(key.second));
    }
  }
  rows_[key] = std::move(probabilities);
}

const std::vector<double>& PredictionSet::at(const FrameKey& key) const {
  const auto it = rows_.find(key);
  if (it == rows_.end()) {
    throw CoverageError("no prediction for frame " + key.first + "/" +
                        std::to_string(key.second));
  }
  return it->second;
}

std::vector<FrameKey> PredictionSet::keys() const {
  std::vector<FrameKey> out;
  out.reserve(rows_.size());
  for (const auto& [key, _] : rows_) out.push_back(key);
  return out;
}

PredictionFormat ParsePredictionFormat(const std::string& name) {
  if (name == "csv") return PredictionFormat::kCsv;
  if (name == "jsonl") return PredictionFormat::kJsonl;
  throw ValidationError("unknown prediction format '" + name + "'");
}

std::string FormatPredictions(const PredictionSet& predictions,
                              PredictionFormat format) {
  if (predictions.empty()) throw ValidationError("refusing to export an empty prediction set");
  std::string out;
  char buf[32];
  if (format == PredictionFormat::kCsv) {
    out += "video_id,frame_idx";
    for (int k = 0; k < predictions.num_classes(); ++k) {
      out += ",p" + std::to_string(k);
    }
    out += '\n';
  }
  for (const auto& [key, probs] : predictions.rows()) {
    if (format == PredictionFormat::kCsv) {
      out += key.first + "," + std::to_string(key.second);
      for (double p : probs) {
        std::snprintf(buf, sizeof(buf), ",%.9f", p);
        out += buf;
      }
    } else {
      out += "{\"video_id\":" + nlohmann::json(key.first).dump() +
             ",\"frame_idx\":" + std::to_string(key.second) + ",\"probs\":[";
      for (size_t k = 0; k < probs.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%s%.9f", k ? "," : "", probs[k]);
        out += buf;
      }
      out += "]}";
    }
    out += '\n';
  }
  return out;
}

void ExportPredictions(const PredictionSet& predictions, const std::string& path,
                       PredictionFormat format) {
  WriteTextFile(path, FormatPredictions(predictions, format));
}

namespace {

double ParseDouble(const std::string& text, const std::string& source, int line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError(source, line, "bad number '" + text + "'");
  }
  return v;
}

int ParseFrameIndex(const std::string& text, const std::string& source, int line) {
  int v = -1;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || v < 0) {
    throw ParseError(source, line, "bad frame index '" + text + "'");
  }
  return v;
}

}  // namespace

PredictionSet ParsePredictions(const std::string& text, PredictionFormat format,
                               const std::string& source) {
  std::vector<std::string> lines = Split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw ParseError(source, 1, "empty prediction file");
  PredictionSet out;
  size_t first = 0;
  if (format == PredictionFormat::kCsv) {
    const auto header = Split(lines[0], ',');
    if (header.size() < 3 || header[0] != "video_id" || header[1] != "frame_idx") {
      throw ParseError(source, 1, "expected header 'video_id,frame_idx,p0,...'");
    }
    out = PredictionSet(static_cast<int>(header.size() - 2));
    first = 1;
  }
  for (size_t i = first; i < lines.size(); ++i) {
    const int line_no = static_cast<int>(i + 1);
    FrameKey key;
    std::vector<double> probs;
    if (format == PredictionFormat::kCsv) {
      const auto fields = Split(lines[i], ',');
      if (static_cast<int>(fields.size()) != out.num_classes() + 2) {
        throw ParseError(source, line_no, "wrong number of fields");
      }
      key = {fields[0], ParseFrameIndex(fields[1], source, line_no)};
      for (size_t k = 2; k < fields.size(); ++k) {
        probs.push_back(ParseDouble(fields[k], source, line_no));
      }
    } else {
      try {
        const auto j = nlohmann::json::parse(lines[i]);
        key = {j.at("video_id").get<std::string>(), j.at("frame_idx").get<int>()};
        probs = j.at("probs").get<std::vector<double>>();
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(source, line_no, e.what());
      }
      if (i == 0) out = PredictionSet(static_cast<int>(probs.size()));
    }
    if (out.contains(key)) {
      throw ParseError(source, line_no, "duplicate frame " + key.first + "/" +
                                            std::to_string(key.second));
    }
    try {
      out.Set(key, std::move(probs));
    } catch (const Error& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  return out;
}

PredictionSet ImportPredictions(const std::string& path) {
  const bool jsonl = path.size() >= 6 && path.substr(path.size() - 6) == ".jsonl";
  return ParsePredictions(ReadTextFile(path),
                          jsonl ? PredictionFormat::kJsonl : PredictionFormat::kCsv,
                          path);
}

}  // namespace sdtriplet
