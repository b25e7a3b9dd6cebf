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

#include "sdtriplet/soft_labels.h"

#include <charconv>
#include <array>
#include <cstdio>

#include "sdtriplet/errors.h"
#include "sdtriplet/util.h"

namespace sdtriplet {

std::set<std::string> SoftLabelSet::videos() const {
  std::set<std::string> out;
  for (const auto& [key, _] : triplet) out.insert(key.first);
  return out;
}

SoftLabelSet SmoothSoftLabels(const SoftLabelSet& soft, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) {
    throw ValidationError("smoothing epsilon must lie in [0, 1)");
  }
  SoftLabelSet out = soft;
  if (epsilon == 0.0) return out;
  const auto sigmoid_smooth = [epsilon](std::vector<double>& v) {
    for (double& s : v) s = (1.0 - epsilon) * s + 0.5 * epsilon;
  };
  for (auto& [key, values] : out.triplet) sigmoid_smooth(values);
  for (auto& [key, aux] : out.aux) {
    sigmoid_smooth(aux.instrument);
    sigmoid_smooth(aux.verb);
    sigmoid_smooth(aux.target);
    const double uniform = aux.phase.empty() ? 0.0 : 1.0 / aux.phase.size();
    for (double& q : aux.phase) q = (1.0 - epsilon) * q + epsilon * uniform;
  }
  // Smoothing composes: (1-b)((1-a)s + a/2) + b/2 = (1-c)s + c/2.
  out.epsilon = 1.0 - (1.0 - soft.epsilon) * (1.0 - epsilon);
  return out;
}

namespace {

void AppendValues(std::string& out, const std::vector<double>& values) {
  char buf[40];
  for (double v : values) {
    std::snprintf(buf, sizeof(buf), ",%.17g", v);
    out += buf;
  }
}

std::array<size_t, 4> AuxWidths(const SoftLabelSet& soft) {
  if (soft.aux.empty()) return {0, 0, 0, 0};
  const AuxSoftLabels& a = soft.aux.begin()->second;
  return {a.instrument.size(), a.verb.size(), a.target.size(), a.phase.size()};
}

}  // namespace

std::string FormatSoftLabels(const SoftLabelSet& soft) {
  const auto widths = AuxWidths(soft);
  char buf[64];
  std::string out = "sdtriplet-softlabels 1\n";
  out += "teacher " + (soft.teacher_hash.empty() ? std::string("-") : soft.teacher_hash) + "\n";
  out += "fold " + std::to_string(soft.fold_id) + "\n";
  std::snprintf(buf, sizeof(buf), "epsilon %.17g\n", soft.epsilon);
  out += buf;
  out += "classes " + std::to_string(soft.num_classes) + "\n";
  out += "aux " + std::to_string(widths[0]) + " " + std::to_string(widths[1]) + " " +
         std::to_string(widths[2]) + " " + std::to_string(widths[3]) + "\n";
  out += "frames " + std::to_string(soft.triplet.size()) + "\n";
  for (const auto& [key, values] : soft.triplet) {
    out += key.first + "," + std::to_string(key.second);
    AppendValues(out, values);
    if (!soft.aux.empty()) {
      const AuxSoftLabels& a = soft.aux.at(key);
      AppendValues(out, a.instrument);
      AppendValues(out, a.verb);
      AppendValues(out, a.target);
      AppendValues(out, a.phase);
    }
    out += "\n";
  }
  return out;
}

SoftLabelSet ParseSoftLabels(const std::string& text, const std::string& source) {
  std::vector<std::string> lines = Split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  const auto field = [&](size_t i, const std::string& key) -> std::vector<std::string> {
    if (i >= lines.size()) throw ParseError(source, int(i + 1), "missing '" + key + "'");
    auto parts = Split(lines[i], ' ');
    if (parts.empty() || parts[0] != key) {
      throw ParseError(source, int(i + 1), "expected '" + key + " ...'");
    }
    return parts;
  };
  const auto to_num = [&](const std::string& s, size_t line) {
    double v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw ParseError(source, int(line + 1), "bad number '" + s + "'");
    }
    return v;
  };
  if (lines.empty() || lines[0] != "sdtriplet-softlabels 1") {
    throw ParseError(source, 1, "expected header 'sdtriplet-softlabels 1'");
  }
  SoftLabelSet soft;
  const auto teacher = field(1, "teacher");
  if (teacher.size() != 2) throw ParseError(source, 2, "expected 'teacher <hash>'");
  soft.teacher_hash = teacher[1] == "-" ? "" : teacher[1];
  const auto fold = field(2, "fold");
  const auto eps = field(3, "epsilon");
  const auto classes = field(4, "classes");
  const auto aux = field(5, "aux");
  const auto frames = field(6, "frames");
  if (fold.size() != 2 || eps.size() != 2 || classes.size() != 2 ||
      aux.size() != 5 || frames.size() != 2) {
    throw ParseError(source, 0, "malformed header");
  }
  soft.fold_id = static_cast<int>(to_num(fold[1], 2));
  soft.epsilon = to_num(eps[1], 3);
  soft.num_classes = static_cast<int>(to_num(classes[1], 4));
  size_t widths[4];
  size_t aux_total = 0;
  for (int i = 0; i < 4; ++i) {
    widths[i] = static_cast<size_t>(to_num(aux[i + 1], 5));
    aux_total += widths[i];
  }
  const size_t count = static_cast<size_t>(to_num(frames[1], 6));
  if (lines.size() != 7 + count) {
    throw ParseError(source, int(lines.size()), "frame count does not match header");
  }
  for (size_t i = 7; i < lines.size(); ++i) {
    const auto parts = Split(lines[i], ',');
    if (parts.size() != 2 + soft.num_classes + aux_total) {
      throw ParseError(source, int(i + 1), "wrong number of values");
    }
    int frame_idx = -1;
    const auto [ptr, ec] =
        std::from_chars(parts[1].data(), parts[1].data() + parts[1].size(), frame_idx);
    if (ec != std::errc() || frame_idx < 0) {
      throw ParseError(source, int(i + 1), "bad frame index");
    }
    const FrameKey key{parts[0], frame_idx};
    std::vector<double> values;
    for (size_t k = 2; k < parts.size(); ++k) {
      const double v = to_num(parts[k], i);
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ParseError(source, int(i + 1), "soft label outside [0, 1]");
      }
      values.push_back(v);
    }
    if (soft.triplet.count(key)) {
      throw ParseError(source, int(i + 1), "duplicate frame");
    }
    soft.triplet[key] = std::vector<double>(values.begin(), values.begin() + soft.num_classes);
    if (aux_total) {
      AuxSoftLabels a;
      auto it = values.begin() + soft.num_classes;
      a.instrument.assign(it, it + widths[0]);
      it += widths[0];
      a.verb.assign(it, it + widths[1]);
      it += widths[1];
      a.target.assign(it, it + widths[2]);
      it += widths[2];
      a.phase.assign(it, it + widths[3]);
      soft.aux[key] = std::move(a);
    }
  }
  return soft;
}

void SaveSoftLabels(const SoftLabelSet& soft, const std::string& path) {
  WriteTextFile(path, FormatSoftLabels(soft));
}

SoftLabelSet LoadSoftLabels(const std::string& path) {
  return ParseSoftLabels(ReadTextFile(path), path);
}

}  // namespace sdtriplet
