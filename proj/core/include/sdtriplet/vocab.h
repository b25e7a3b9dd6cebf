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

#ifndef SDTRIPLET_VOCAB_H_
#define SDTRIPLET_VOCAB_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sdtriplet {

// Binary multi-hot label vector indexed by triplet class id.
using LabelVector = std::vector<uint8_t>;

struct ComponentVocabulary {
  std::vector<std::string> instruments;
  std::vector<std::string> verbs;
  std::vector<std::string> targets;

  // Throws ValidationError on empty or duplicate names.
  void Validate() const;
};

struct Triplet {
  int instrument = 0;
  int verb = 0;
  int target = 0;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

struct ComponentLabels {
  LabelVector instrument;
  LabelVector verb;
  LabelVector target;

  friend bool operator==(const ComponentLabels&,
                         const ComponentLabels&) = default;
};

// The compositional label space. Class ids are positions in `triplets()`,
// i.e. file order. Immutable once constructed.
class TripletVocabulary {
 public:
  TripletVocabulary(ComponentVocabulary components,
                    std::vector<Triplet> triplets);

  // Every (i, v, t) tuple in row-major order.
  static TripletVocabulary Full(int num_instruments, int num_verbs,
                                int num_targets);
  // Component names "instrument_<k>", "verb_<k>", "target_<k>".
  static ComponentVocabulary NumberedComponents(int num_instruments,
                                                int num_verbs,
                                                int num_targets);

  int num_classes() const { return static_cast<int>(triplets_.size()); }
  int num_instruments() const {
    return static_cast<int>(components_.instruments.size());
  }
  int num_verbs() const { return static_cast<int>(components_.verbs.size()); }
  int num_targets() const {
    return static_cast<int>(components_.targets.size());
  }

  const ComponentVocabulary& components() const { return components_; }
  const std::vector<Triplet>& triplets() const { return triplets_; }

  Triplet Decompose(int class_id) const;
  std::optional<int> Compose(int instrument, int verb, int target) const;
  std::optional<int> FindByName(const std::string& instrument,
                                const std::string& verb,
                                const std::string& target) const;
  std::string ClassName(int class_id) const;

  // Elementwise OR of the components of every active triplet.
  ComponentLabels ComponentMultiHot(std::span<const uint8_t> labels) const;

  // Number of positions (instrument, verb, target) where the two triplets
  // agree: 3 iff a == b.
  int ComponentMatchCount(int a, int b) const;

  // Classes differing from `class_id` in exactly one component.
  std::vector<int> OneComponentNeighbors(int class_id) const;

  friend bool operator==(const TripletVocabulary& a,
                         const TripletVocabulary& b) {
    return a.components_.instruments == b.components_.instruments &&
           a.components_.verbs == b.components_.verbs &&
           a.components_.targets == b.components_.targets &&
           a.triplets_ == b.triplets_;
  }

 private:
  int FlatIndex(int instrument, int verb, int target) const;

  ComponentVocabulary components_;
  std::vector<Triplet> triplets_;
  std::vector<int> lookup_;  // flat (i, v, t) -> class id or -1
};

// Vocabulary text format:
//
//   sdtriplet-vocab 1
//   instruments <n>      followed by n lines, one name each
//   verbs <n>            followed by n lines
//   targets <n>          followed by n lines
//   triplets <c>         followed by c lines "class_id,instrument,verb,target"
//
// Blank lines and lines starting with '#' are ignored. class_id must equal
// the record's position. Duplicate names or tuples are rejected.
TripletVocabulary ParseVocabulary(const std::string& text,
                                  const std::string& source = "<vocab>");
std::string FormatVocabulary(const TripletVocabulary& vocab);
TripletVocabulary LoadVocabulary(const std::string& path);
void SaveVocabulary(const TripletVocabulary& vocab, const std::string& path);

// Per-class fraction of frames whose label vector has that class active.
using PrevalenceTable = std::vector<double>;

PrevalenceTable ComputePrevalence(std::span<const LabelVector> frames,
                                  int num_classes);

}  // namespace sdtriplet

#endif  // SDTRIPLET_VOCAB_H_
