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

#include <set>
#include <sstream>
#include <unordered_set>

#include "sdtriplet/errors.h"
#include "sdtriplet/util.h"

namespace sdtriplet {
namespace {

void ValidateNames(const std::vector<std::string>& names, const char* kind) {
  if (names.empty()) {
    throw ValidationError(std::string("no ") + kind + " names");
  }
  std::unordered_set<std::string> seen;
  for (const std::string& name : names) {
    if (name.empty()) {
      throw ValidationError(std::string("empty ") + kind + " name");
    }
    if (!seen.insert(name).second) {
      throw ValidationError(std::string("duplicate ") + kind + " name '" +
                            name + "'");
    }
  }
}

int IndexOf(const std::vector<std::string>& names, const std::string& name) {
  for (size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace

void ComponentVocabulary::Validate() const {
  ValidateNames(instruments, "instrument");
  ValidateNames(verbs, "verb");
  ValidateNames(targets, "target");
}

TripletVocabulary::TripletVocabulary(ComponentVocabulary components,
                                     std::vector<Triplet> triplets)
    : components_(std::move(components)), triplets_(std::move(triplets)) {
  components_.Validate();
  if (triplets_.empty()) throw ValidationError("vocabulary has no triplets");
  lookup_.assign(static_cast<size_t>(num_instruments()) * num_verbs() *
                     num_targets(),
                 -1);
  for (size_t id = 0; id < triplets_.size(); ++id) {
    const Triplet& t = triplets_[id];
    if (t.instrument < 0 || t.instrument >= num_instruments() || t.verb < 0 ||
        t.verb >= num_verbs() || t.target < 0 || t.target >= num_targets()) {
      throw ValidationError("triplet " + std::to_string(id) +
                            " has an out-of-range component index");
    }
    int& slot = lookup_[FlatIndex(t.instrument, t.verb, t.target)];
    if (slot >= 0) {
      throw ValidationError("triplet " + std::to_string(id) +
                            " duplicates class " + std::to_string(slot));
    }
    slot = static_cast<int>(id);
  }
}

ComponentVocabulary TripletVocabulary::NumberedComponents(int num_instruments,
                                                          int num_verbs,
                                                          int num_targets) {
  if (num_instruments < 1 || num_verbs < 1 || num_targets < 1) {
    throw ValidationError("component counts must be >= 1");
  }
  ComponentVocabulary c;
  for (int i = 0; i < num_instruments; ++i) {
    c.instruments.push_back("instrument_" + std::to_string(i));
  }
  for (int i = 0; i < num_verbs; ++i) {
    c.verbs.push_back("verb_" + std::to_string(i));
  }
  for (int i = 0; i < num_targets; ++i) {
    c.targets.push_back("target_" + std::to_string(i));
  }
  return c;
}

TripletVocabulary TripletVocabulary::Full(int num_instruments, int num_verbs,
                                          int num_targets) {
  std::vector<Triplet> all;
  for (int i = 0; i < num_instruments; ++i) {
    for (int v = 0; v < num_verbs; ++v) {
      for (int t = 0; t < num_targets; ++t) all.push_back({i, v, t});
    }
  }
  return TripletVocabulary(
      NumberedComponents(num_instruments, num_verbs, num_targets),
      std::move(all));
}

int TripletVocabulary::FlatIndex(int instrument, int verb, int target) const {
  return (instrument * num_verbs() + verb) * num_targets() + target;
}

Triplet TripletVocabulary::Decompose(int class_id) const {
  if (class_id < 0 || class_id >= num_classes()) {
    throw IndexError("triplet class id " + std::to_string(class_id) +
                     " out of range [0, " + std::to_string(num_classes()) +
                     ")");
  }
  return triplets_[class_id];
}

std::optional<int> TripletVocabulary::Compose(int instrument, int verb,
                                              int target) const {
  if (instrument < 0 || instrument >= num_instruments() || verb < 0 ||
      verb >= num_verbs() || target < 0 || target >= num_targets()) {
    throw IndexError("component index out of range");
  }
  const int id = lookup_[FlatIndex(instrument, verb, target)];
  if (id < 0) return std::nullopt;
  return id;
}

std::optional<int> TripletVocabulary::FindByName(
    const std::string& instrument, const std::string& verb,
    const std::string& target) const {
  const int i = IndexOf(components_.instruments, instrument);
  const int v = IndexOf(components_.verbs, verb);
  const int t = IndexOf(components_.targets, target);
  if (i < 0 || v < 0 || t < 0) return std::nullopt;
  return Compose(i, v, t);
}

std::string TripletVocabulary::ClassName(int class_id) const {
  const Triplet t = Decompose(class_id);
  return components_.instruments[t.instrument] + "," +
         components_.verbs[t.verb] + "," + components_.targets[t.target];
}

ComponentLabels TripletVocabulary::ComponentMultiHot(
    std::span<const uint8_t> labels) const {
  if (static_cast<int>(labels.size()) != num_classes()) {
    throw ShapeError("label vector has length " +
                     std::to_string(labels.size()) + ", expected " +
                     std::to_string(num_classes()));
  }
  ComponentLabels out{LabelVector(num_instruments(), 0),
                      LabelVector(num_verbs(), 0),
                      LabelVector(num_targets(), 0)};
  for (int c = 0; c < num_classes(); ++c) {
    if (labels[c] == 0) continue;
    const Triplet& t = triplets_[c];
    out.instrument[t.instrument] = 1;
    out.verb[t.verb] = 1;
    out.target[t.target] = 1;
  }
  return out;
}

int TripletVocabulary::ComponentMatchCount(int a, int b) const {
  const Triplet ta = Decompose(a);
  const Triplet tb = Decompose(b);
  return (ta.instrument == tb.instrument) + (ta.verb == tb.verb) +
         (ta.target == tb.target);
}

std::vector<int> TripletVocabulary::OneComponentNeighbors(int class_id) const {
  std::vector<int> out;
  for (int c = 0; c < num_classes(); ++c) {
    if (ComponentMatchCount(class_id, c) == 2) out.push_back(c);
  }
  return out;
}

namespace {

class LineReader {
 public:
  LineReader(const std::string& text, std::string source)
      : in_(text), source_(std::move(source)) {}

  // Next non-blank, non-comment line; false at end of input.
  bool Next(std::string& line) {
    std::string raw;
    while (std::getline(in_, raw)) {
      ++line_no_;
      const std::string_view trimmed = Trim(raw);
      if (trimmed.empty() || trimmed.front() == '#') continue;
      line = std::string(trimmed);
      return true;
    }
    return false;
  }

  std::string Require(const char* what) {
    std::string line;
    if (!Next(line)) Fail(std::string("unexpected end of file, expected ") + what);
    return line;
  }

  [[noreturn]] void Fail(const std::string& what) const {
    throw ParseError(source_, line_no_, what);
  }

  int line_no() const { return line_no_; }

 private:
  std::istringstream in_;
  std::string source_;
  int line_no_ = 0;
};

int ParseCount(LineReader& reader, const std::string& line,
               const std::string& keyword) {
  const auto parts = Split(line, ' ');
  if (parts.size() != 2 || parts[0] != keyword) {
    reader.Fail("expected '" + keyword + " <count>'");
  }
  try {
    size_t used = 0;
    const int n = std::stoi(parts[1], &used);
    if (used != parts[1].size() || n < 0) throw std::invalid_argument("");
    return n;
  } catch (const std::exception&) {
    reader.Fail("bad count '" + parts[1] + "'");
  }
}

std::vector<std::string> ParseNames(LineReader& reader,
                                    const std::string& keyword) {
  const int n = ParseCount(reader, reader.Require(keyword.c_str()), keyword);
  std::vector<std::string> names;
  std::unordered_set<std::string> seen;
  for (int i = 0; i < n; ++i) {
    std::string name = reader.Require("a name");
    if (name.find(',') != std::string::npos) {
      reader.Fail("name '" + name + "' contains a comma");
    }
    if (!seen.insert(name).second) {
      reader.Fail("duplicate " + keyword + " name '" + name + "'");
    }
    names.push_back(std::move(name));
  }
  return names;
}

}  // namespace

TripletVocabulary ParseVocabulary(const std::string& text,
                                  const std::string& source) {
  LineReader reader(text, source);
  if (reader.Require("header") != "sdtriplet-vocab 1") {
    reader.Fail("expected header 'sdtriplet-vocab 1'");
  }
  ComponentVocabulary components;
  components.instruments = ParseNames(reader, "instruments");
  components.verbs = ParseNames(reader, "verbs");
  components.targets = ParseNames(reader, "targets");

  const int n = ParseCount(reader, reader.Require("triplets"), "triplets");
  std::vector<Triplet> triplets;
  std::set<std::tuple<int, int, int>> seen;
  for (int id = 0; id < n; ++id) {
    const auto fields = Split(reader.Require("a triplet record"), ',');
    if (fields.size() != 4) {
      reader.Fail("expected 'class_id,instrument,verb,target'");
    }
    if (fields[0] != std::to_string(id)) {
      reader.Fail("class id '" + fields[0] + "' out of order, expected " +
                  std::to_string(id));
    }
    const int i = IndexOf(components.instruments, fields[1]);
    const int v = IndexOf(components.verbs, fields[2]);
    const int t = IndexOf(components.targets, fields[3]);
    if (i < 0) reader.Fail("unknown instrument '" + fields[1] + "'");
    if (v < 0) reader.Fail("unknown verb '" + fields[2] + "'");
    if (t < 0) reader.Fail("unknown target '" + fields[3] + "'");
    if (!seen.emplace(i, v, t).second) {
      reader.Fail("duplicate triplet " + fields[1] + "," + fields[2] + "," +
                  fields[3]);
    }
    triplets.push_back({i, v, t});
  }
  std::string extra;
  if (reader.Next(extra)) reader.Fail("trailing content '" + extra + "'");
  try {
    return TripletVocabulary(std::move(components), std::move(triplets));
  } catch (const ValidationError& e) {
    throw ParseError(source, 0, e.what());
  }
}

std::string FormatVocabulary(const TripletVocabulary& vocab) {
  std::ostringstream out;
  out << "sdtriplet-vocab 1\n";
  const auto& c = vocab.components();
  out << "instruments " << c.instruments.size() << "\n";
  for (const auto& n : c.instruments) out << n << "\n";
  out << "verbs " << c.verbs.size() << "\n";
  for (const auto& n : c.verbs) out << n << "\n";
  out << "targets " << c.targets.size() << "\n";
  for (const auto& n : c.targets) out << n << "\n";
  out << "triplets " << vocab.num_classes() << "\n";
  for (int id = 0; id < vocab.num_classes(); ++id) {
    out << id << "," << vocab.ClassName(id) << "\n";
  }
  return out.str();
}

TripletVocabulary LoadVocabulary(const std::string& path) {
  return ParseVocabulary(ReadTextFile(path), path);
}

void SaveVocabulary(const TripletVocabulary& vocab, const std::string& path) {
  WriteTextFile(path, FormatVocabulary(vocab));
}

PrevalenceTable ComputePrevalence(std::span<const LabelVector> frames,
                                  int num_classes) {
  if (frames.empty()) throw ValidationError("prevalence of an empty manifest");
  std::vector<int64_t> counts(num_classes, 0);
  for (const LabelVector& labels : frames) {
    if (static_cast<int>(labels.size()) != num_classes) {
      throw ShapeError("label vector length mismatch");
    }
    for (int c = 0; c < num_classes; ++c) counts[c] += labels[c] != 0;
  }
  PrevalenceTable table(num_classes);
  for (int c = 0; c < num_classes; ++c) {
    table[c] = static_cast<double>(counts[c]) /
               static_cast<double>(frames.size());
  }
  return table;
}

}  // namespace sdtriplet
