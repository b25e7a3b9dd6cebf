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

#include <charconv>
#include <filesystem>
#include <sstream>

#include "sdtriplet/datagen.h"
#include "sdtriplet/errors.h"
#include "sdtriplet/util.h"

namespace sdtriplet {
namespace {

std::string FormatIds(const LabelVector& labels) {
  std::string out;
  for (size_t k = 0; k < labels.size(); ++k) {
    if (!labels[k]) continue;
    if (!out.empty()) out += ';';
    out += std::to_string(k);
  }
  return out;
}

bool ParseInt(std::string_view text, int64_t& value) {
  if (text.empty()) return false;
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  return ec == std::errc() && ptr == text.data() + text.size();
}

LabelVector ParseIds(const std::string& field, int num_classes,
                     const std::string& source, int line) {
  LabelVector labels(num_classes, 0);
  if (field.empty()) return labels;
  for (const std::string& part : Split(field, ';')) {
    int64_t id = -1;
    if (!ParseInt(part, id) || id < 0 || id >= num_classes) {
      throw ParseError(source, line, "bad class id '" + part + "'");
    }
    if (labels[id]) {
      throw ParseError(source, line, "class id " + part + " listed twice");
    }
    labels[id] = 1;
  }
  return labels;
}

int64_t HeaderValue(const std::vector<std::string>& lines, size_t index,
                    const std::string& keyword, const std::string& source) {
  if (index >= lines.size()) {
    throw ParseError(source, static_cast<int>(index + 1),
                     "missing '" + keyword + "' line");
  }
  const auto parts = Split(Trim(lines[index]), ' ');
  int64_t value = 0;
  if (parts.size() != 2 || parts[0] != keyword || !ParseInt(parts[1], value)) {
    throw ParseError(source, static_cast<int>(index + 1),
                     "expected '" + keyword + " <integer>'");
  }
  return value;
}

std::vector<std::string> SplitLines(const std::string& text) {
  std::vector<std::string> lines = Split(text, '\n');
  for (std::string& l : lines) {
    if (!l.empty() && l.back() == '\r') l.pop_back();
  }
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::string VocabHeaderPath(const std::vector<std::string>& lines,
                            const std::string& source) {
  if (lines.size() < 2 || lines[1].rfind("vocab ", 0) != 0 ||
      lines[1].size() <= 6) {
    throw ParseError(source, 2, "expected 'vocab <path>'");
  }
  return lines[1].substr(6);
}

}  // namespace

std::string FormatManifest(const DatasetManifest& manifest) {
  std::ostringstream out;
  out << "sdtriplet-manifest 1\n";
  out << "vocab " << manifest.vocab_path() << "\n";
  out << "phases " << manifest.num_phases() << "\n";
  out << "classes " << manifest.num_classes() << "\n";
  out << "frames " << manifest.frames().size() << "\n";
  for (const FrameRecord& f : manifest.frames()) {
    out << f.video_id << ',' << f.frame_idx << ',' << f.image << ','
        << FormatIds(f.labels) << ',' << f.phase << ','
        << (f.clean_labels ? FormatIds(*f.clean_labels) : std::string("-"))
        << '\n';
  }
  return out.str();
}

DatasetManifest ParseManifest(const std::string& text,
                              std::shared_ptr<const TripletVocabulary> vocab,
                              const std::string& source) {
  const std::vector<std::string> lines = SplitLines(text);
  if (lines.empty() || lines[0] != "sdtriplet-manifest 1") {
    throw ParseError(source, 1, "expected header 'sdtriplet-manifest 1'");
  }
  const std::string vocab_path = VocabHeaderPath(lines, source);
  const int64_t phases = HeaderValue(lines, 2, "phases", source);
  const int64_t classes = HeaderValue(lines, 3, "classes", source);
  const int64_t count = HeaderValue(lines, 4, "frames", source);
  if (classes != vocab->num_classes()) {
    throw ParseError(source, 4,
                     "class count " + std::to_string(classes) +
                         " does not match vocabulary (" +
                         std::to_string(vocab->num_classes()) + ")");
  }
  if (phases < 1) throw ParseError(source, 3, "phases must be >= 1");
  if (static_cast<int64_t>(lines.size()) - 5 != count) {
    throw ParseError(source, static_cast<int>(lines.size()),
                     "expected " + std::to_string(count) + " frame rows, found " +
                         std::to_string(lines.size() - 5));
  }
  std::vector<FrameRecord> frames;
  frames.reserve(count);
  std::set<FrameKey> seen;
  for (size_t i = 5; i < lines.size(); ++i) {
    const int line_no = static_cast<int>(i + 1);
    const auto fields = Split(lines[i], ',');
    if (fields.size() != 6) {
      throw ParseError(source, line_no, "expected 6 comma-separated fields");
    }
    FrameRecord f;
    f.video_id = fields[0];
    int64_t frame_idx = -1, phase = -1;
    if (f.video_id.empty()) throw ParseError(source, line_no, "empty video id");
    if (!ParseInt(fields[1], frame_idx) || frame_idx < 0) {
      throw ParseError(source, line_no, "bad frame index '" + fields[1] + "'");
    }
    f.frame_idx = static_cast<int>(frame_idx);
    if (!seen.insert(f.key()).second) {
      throw ParseError(source, line_no,
                       "duplicate frame " + f.video_id + "/" + fields[1]);
    }
    f.image = fields[2];
    f.labels = ParseIds(fields[3], vocab->num_classes(), source, line_no);
    if (!ParseInt(fields[4], phase) || phase < 0 || phase >= phases) {
      throw ParseError(source, line_no, "bad phase '" + fields[4] + "'");
    }
    f.phase = static_cast<int>(phase);
    if (fields[5] != "-") {
      f.clean_labels = ParseIds(fields[5], vocab->num_classes(), source, line_no);
    }
    frames.push_back(std::move(f));
  }
  try {
    DatasetManifest manifest(std::move(vocab), std::move(frames),
                             static_cast<int>(phases));
    manifest.set_vocab_path(vocab_path);
    return manifest;
  } catch (const Error& e) {
    throw ParseError(source, 0, e.what());
  }
}

void SaveManifest(const DatasetManifest& manifest, const std::string& path) {
  WriteTextFile(path, FormatManifest(manifest));
}

DatasetManifest LoadManifest(const std::string& path) {
  namespace fs = std::filesystem;
  const std::string text = ReadTextFile(path);
  const std::vector<std::string> head = SplitLines(text.substr(0, 4096));
  if (head.empty() || head[0] != "sdtriplet-manifest 1") {
    throw ParseError(path, 1, "expected header 'sdtriplet-manifest 1'");
  }
  const fs::path base = fs::path(path).parent_path();
  fs::path vocab_file = VocabHeaderPath(head, path);
  if (vocab_file.is_relative()) vocab_file = base / vocab_file;
  auto vocab =
      std::make_shared<const TripletVocabulary>(LoadVocabulary(vocab_file.string()));
  DatasetManifest manifest = ParseManifest(text, std::move(vocab), path);
  manifest.set_base_dir(base.string());
  return manifest;
}

Image LoadFrameImage(const DatasetManifest& manifest, const FrameRecord& frame) {
  if (frame.image.rfind("synth:", 0) == 0) {
    const auto parts = Split(frame.image, ':');
    int64_t size = 0;
    uint64_t seed = 0;
    const std::string& seed_text = parts.size() == 3 ? parts[2] : std::string();
    const auto [ptr, ec] = std::from_chars(
        seed_text.data(), seed_text.data() + seed_text.size(), seed);
    if (parts.size() != 3 || !ParseInt(parts[1], size) || ec != std::errc() ||
        ptr != seed_text.data() + seed_text.size()) {
      throw FormatError("bad synthetic image reference '" + frame.image + "'");
    }
    SyntheticRenderSpec spec;
    spec.size = static_cast<int>(size);
    spec.num_phases = manifest.num_phases();
    return RenderSyntheticFrame(manifest.vocab(), frame.reference_labels(),
                                frame.phase, spec, seed);
  }
  std::filesystem::path p = frame.image;
  if (p.is_relative() && !manifest.base_dir().empty()) {
    p = std::filesystem::path(manifest.base_dir()) / p;
  }
  return LoadPpm(p.string());
}

}  // namespace sdtriplet
