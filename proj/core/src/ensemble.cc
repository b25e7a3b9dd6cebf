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

#include "sdtriplet/ensemble.h"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <numeric>
#include <thread>

#include "json.hpp"
#include "sdtriplet/errors.h"
#include "sdtriplet/util.h"

namespace sdtriplet {

void EnsembleSpec::Validate() const {
  if (members.empty()) throw ValidationError("ensemble needs at least one member");
  if (expected_folds < 1) throw ValidationError("expected_folds must be >= 1");
  double total = 0.0;
  for (const EnsembleMember& m : members) {
    if (static_cast<int>(m.folds.size()) != expected_folds) {
      throw ValidationError("member '" + m.name + "' has " +
                            std::to_string(m.folds.size()) +
                            " fold checkpoints, expected " +
                            std::to_string(expected_folds));
    }
    if (!(m.weight >= 0.0)) {
      throw ValidationError("member '" + m.name + "' has a negative weight");
    }
    total += m.weight;
  }
  if (!(total > 0.0)) throw ValidationError("member weights sum to zero");
}

EnsembleSpec ParseEnsembleSpec(const std::string& text, const std::string& base_dir,
                               const std::string& source) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(source + ": " + e.what());
  }
  EnsembleSpec spec;
  try {
    spec.expected_folds = j.value("expected_folds", 5);
    for (const auto& jm : j.at("members")) {
      EnsembleMember m;
      m.name = jm.value("name", "");
      m.description = jm.value("description", "");
      m.weight = jm.value("weight", 1.0);
      for (const auto& jc : jm.at("checkpoints")) {
        CheckpointRef ref;
        ref.path = jc.at("path").get<std::string>();
        ref.sha256 = jc.at("sha256").get<std::string>();
        if (!base_dir.empty() && std::filesystem::path(ref.path).is_relative()) {
          ref.path = (std::filesystem::path(base_dir) / ref.path).string();
        }
        m.folds.push_back(std::move(ref));
      }
      spec.members.push_back(std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(source + ": " + e.what());
  }
  spec.Validate();
  return spec;
}

std::string FormatEnsembleSpec(const EnsembleSpec& spec) {
  nlohmann::json j;
  j["expected_folds"] = spec.expected_folds;
  j["members"] = nlohmann::json::array();
  for (const EnsembleMember& m : spec.members) {
    nlohmann::json jm;
    jm["name"] = m.name;
    jm["description"] = m.description;
    jm["weight"] = m.weight;
    jm["checkpoints"] = nlohmann::json::array();
    for (const CheckpointRef& ref : m.folds) {
      jm["checkpoints"].push_back({{"path", ref.path}, {"sha256", ref.sha256}});
    }
    j["members"].push_back(std::move(jm));
  }
  return j.dump(2) + "\n";
}

EnsembleSpec LoadEnsembleSpec(const std::string& path) {
  return ParseEnsembleSpec(ReadTextFile(path),
                           std::filesystem::path(path).parent_path().string(), path);
}

namespace {

void CheckSameCoverage(std::span<const PredictionSet> sets) {
  if (sets.empty()) throw ValidationError("nothing to average");
  const PredictionSet& first = sets.front();
  for (size_t s = 1; s < sets.size(); ++s) {
    if (sets[s].num_classes() != first.num_classes()) {
      throw ShapeError("prediction sets disagree on the class count");
    }
    std::vector<FrameKey> differing;
    for (const auto& [key, _] : first.rows()) {
      if (!sets[s].contains(key)) differing.push_back(key);
    }
    for (const auto& [key, _] : sets[s].rows()) {
      if (!first.contains(key)) differing.push_back(key);
    }
    if (differing.empty()) continue;
    std::string message = "prediction set " + std::to_string(s) +
                          " covers different frames than set 0:";
    for (size_t i = 0; i < std::min<size_t>(differing.size(), 10); ++i) {
      message += " " + differing[i].first + "/" + std::to_string(differing[i].second);
    }
    if (differing.size() > 10) {
      message += " (+" + std::to_string(differing.size() - 10) + " more)";
    }
    throw CoverageError(message);
  }
}

}  // namespace

PredictionSet WeightedAveragePredictions(std::span<const PredictionSet> sets,
                                         std::span<const double> weights) {
  CheckSameCoverage(sets);
  if (weights.size() != sets.size()) throw ShapeError("one weight per set required");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ValidationError("weights must be non-negative");
    total += w;
  }
  if (!(total > 0.0)) throw ValidationError("weights sum to zero");

  const int classes = sets.front().num_classes();
  PredictionSet out(classes);
  std::vector<std::pair<double, double>> terms(sets.size());
  for (const auto& [key, _] : sets.front().rows()) {
    std::vector<double> mean(classes);
    for (int c = 0; c < classes; ++c) {
      double lo = 1.0, hi = 0.0;
      for (size_t s = 0; s < sets.size(); ++s) {
        const double v = sets[s].at(key)[c];
        terms[s] = {v, weights[s]};
        if (weights[s] > 0.0) {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      }
      // Summing in sorted order makes the result independent of input order.
      std::sort(terms.begin(), terms.end());
      double acc = 0.0;
      for (const auto& [v, w] : terms) acc += w * v;
      mean[c] = std::clamp(acc / total, lo, hi);
    }
    out.Set(key, std::move(mean));
  }
  return out;
}

PredictionSet AverageFoldPredictions(std::span<const PredictionSet> sets) {
  const std::vector<double> weights(sets.size(), 1.0);
  return WeightedAveragePredictions(sets, weights);
}

PredictionSet FoldAveragedPredictions(std::span<const Checkpoint> folds,
                                      const DatasetManifest& manifest,
                                      FrameImageCache& images,
                                      const std::vector<size_t>& frames) {
  std::vector<PredictionSet> per_fold;
  per_fold.reserve(folds.size());
  for (const Checkpoint& c : folds) {
    per_fold.push_back(PredictTriplets(c.ToNetwork(), manifest, images, frames));
  }
  return AverageFoldPredictions(per_fold);
}

EnsembleOutput EnsemblePredict(const EnsembleSpec& spec,
                               const DatasetManifest& manifest,
                               FrameImageCache& images, int workers) {
  spec.Validate();
  std::vector<size_t> frames(manifest.frames().size());
  std::iota(frames.begin(), frames.end(), 0);

  std::vector<std::vector<Checkpoint>> loaded(spec.members.size());
  for (size_t m = 0; m < spec.members.size(); ++m) {
    for (const CheckpointRef& ref : spec.members[m].folds) {
      Checkpoint c = LoadCheckpoint(ref.path);
      const std::string digest = c.Hash();
      if (digest != ref.sha256) {
        throw IntegrityError("checkpoint " + ref.path + " has digest " + digest +
                             ", ensemble spec expects " + ref.sha256);
      }
      if (c.dims.triplet != manifest.num_classes()) {
        throw ShapeError("checkpoint " + ref.path +
                         " does not match the manifest class count");
      }
      loaded[m].push_back(std::move(c));
    }
  }

  EnsembleOutput out;
  out.members.resize(spec.members.size());
  std::vector<std::string> errors(spec.members.size());
  std::atomic<size_t> next{0};
  const auto worker = [&] {
    for (size_t m; (m = next.fetch_add(1)) < spec.members.size();) {
      try {
        out.members[m] = FoldAveragedPredictions(loaded[m], manifest, images, frames);
      } catch (const std::exception& e) {
        errors[m] = e.what();
      }
    }
  };
  const int threads =
      std::clamp(workers, 1, static_cast<int>(spec.members.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (size_t m = 0; m < errors.size(); ++m) {
    if (!errors[m].empty()) {
      throw Error("member '" + spec.members[m].name + "': " + errors[m]);
    }
  }

  std::vector<double> weights;
  for (const EnsembleMember& m : spec.members) weights.push_back(m.weight);
  out.ensemble = WeightedAveragePredictions(out.members, weights);
  return out;
}

}  // namespace sdtriplet
