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


#include "sdtriplet/distill.h"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "sdtriplet/errors.h"
#include "sdtriplet/losses.h"
#include "sdtriplet/util.h"
#include "support/fixtures.h"

namespace sdtriplet {
namespace {

using testing::TinyRunConfig;

struct TinyProblem {
  SyntheticDataset data = GenerateSyntheticDataset(testing::TinySpec(21));
  std::vector<FoldSplit> folds = MakeFoldSplits(data.manifest, 3, 5);
  FrameImageCache cache{data.manifest};
};

TEST(DistillConfigTest, ValidationRejectsBadValues) {
  DistillRunConfig c = TinyRunConfig();
  EXPECT_NO_THROW(c.Validate());
  c.epsilon = 1.0;
  EXPECT_THROW(c.Validate(), ConfigError);
  c.epsilon = 0.0;
  c.alpha = 1.5;
  EXPECT_THROW(c.Validate(), ConfigError);
  c.alpha = 1.0;
  c.student.lr_min = 1.0;
  EXPECT_THROW(c.Validate(), ConfigError);
}

TEST(DistillConfigTest, EnumNamesRoundTrip) {
  for (auto s : {SoftTargetScope::kTripletOnly, SoftTargetScope::kAllHeads}) {
    EXPECT_EQ(ParseSoftTargetScope(SoftTargetScopeName(s)), s);
  }
  for (auto r : {CheckpointRule::kFinalEpoch, CheckpointRule::kBestValMap}) {
    EXPECT_EQ(ParseCheckpointRule(CheckpointRuleName(r)), r);
  }
  EXPECT_THROW(ParseCheckpointRule("latest"), ValidationError);
}

TEST(SelectBestEpochTest, ArgmaxWithEarliestTieAndNaNLowest) {
  const double nan = std::nan("");
  std::vector<EpochLog> curve = {{1, 0, 0.2, 0}, {2, 0, 0.5, 0}, {3, 0, 0.5, 0},
                                 {4, 0, nan, 0}, {5, 0, 0.1, 0}};
  EXPECT_EQ(SelectBestEpoch(curve), 1);
  curve = {{1, 0, nan, 0}, {2, 0, nan, 0}};
  EXPECT_EQ(SelectBestEpoch(curve), 1);
  EXPECT_THROW(SelectBestEpoch({}), ValidationError);
}

TEST(HardTargetsTest, ComponentsAndPhaseFromLabels) {
  auto vocab = testing::FullVocab(2, 2, 2);
  const DatasetManifest m = testing::MakeManifest(
      vocab, {"v", "v"}, {testing::Labels(8, {0, 7}), testing::Labels(8, {})}, 3);
  const FrameTargets t = HardTargets(m, m.frames()[0]);
  EXPECT_EQ(t.triplet, (std::vector<double>{1, 0, 0, 0, 0, 0, 0, 1}));
  EXPECT_EQ(t.instrument, (std::vector<double>{1, 1}));
  EXPECT_EQ(t.phase, (std::vector<double>{1, 0, 0}));
  const FrameTargets empty = HardTargets(m, m.frames()[1]);
  EXPECT_EQ(empty.verb, (std::vector<double>{0, 0}));
  EXPECT_EQ(empty.phase, (std::vector<double>{0, 1, 0}));
}

TEST(TeacherTest, SmokeRunRecordsCurveAndFinalEpoch) {
  TinyProblem p;
  const DistillRunConfig c = TinyRunConfig(2, 2);
  const TrainingRun run = TrainTeacher(p.data.manifest, p.cache, p.folds[0], c);
  EXPECT_EQ(run.checkpoint.role, "teacher");
  EXPECT_EQ(run.checkpoint.fold_id, 0);
  EXPECT_EQ(run.checkpoint.epoch, 2);
  EXPECT_EQ(run.selected_epoch, 2);
  ASSERT_EQ(run.checkpoint.curve.size(), 2u);
  const int64_t n = static_cast<int64_t>(
      p.data.manifest.FrameIndicesFor(p.folds[0].train_videos).size());
  const int64_t total = c.teacher.epochs * ((n + c.teacher.batch_size - 1) / c.teacher.batch_size);
  EXPECT_DOUBLE_EQ(run.checkpoint.curve.back().lr_end,
                   CosineLr(total - 1, total, c.teacher.lr_max, c.teacher.lr_min));
  EXPECT_GT(run.checkpoint.curve.front().lr_end, run.checkpoint.curve.back().lr_end);
  EXPECT_EQ(run.val_predictions.size(),
            p.data.manifest.FrameIndicesFor(p.folds[0].val_videos).size());
  EXPECT_DOUBLE_EQ(run.checkpoint.val_map, run.checkpoint.curve.back().val_map);
}

TEST(TeacherTest, DeterministicForFixedSeeds) {
  TinyProblem p;
  const DistillRunConfig c = TinyRunConfig(2, 2);
  const TrainingRun a = TrainTeacher(p.data.manifest, p.cache, p.folds[1], c);
  const TrainingRun b = TrainTeacher(p.data.manifest, p.cache, p.folds[1], c);
  EXPECT_EQ(a.checkpoint.params, b.checkpoint.params);
  EXPECT_EQ(a.checkpoint.Hash(), b.checkpoint.Hash());
  DistillRunConfig other = c;
  other.teacher.data_seed = 99;
  const TrainingRun d = TrainTeacher(p.data.manifest, p.cache, p.folds[1], other);
  EXPECT_NE(a.checkpoint.params, d.checkpoint.params);
}

TEST(TeacherTest, TrainingLossDecreases) {
  SyntheticSpec spec = testing::TinySpec(22);
  spec.frames_per_video = 30;
  const SyntheticDataset data = GenerateSyntheticDataset(spec);
  FrameImageCache cache(data.manifest);
  const auto folds = MakeFoldSplits(data.manifest, 3, 1);
  const DistillRunConfig c = TinyRunConfig(8, 1);
  const TrainingRun run = TrainTeacher(data.manifest, cache, folds[0], c);
  EXPECT_LT(run.checkpoint.curve.back().train_loss, run.checkpoint.curve.front().train_loss);
}

TEST(TeacherTest, EmptyTrainingSplitRejected) {
  TinyProblem p;
  FoldSplit fold = p.folds[0];
  fold.train_videos.clear();
  EXPECT_THROW(TrainTeacher(p.data.manifest, p.cache, fold, TinyRunConfig()),
               ValidationError);
}

TEST(SoftLabelGenerationTest, CoversExactlyTrainingFramesWithProbabilities) {
  TinyProblem p;
  DistillRunConfig c = TinyRunConfig(1, 1);
  c.model.heads = HeadConfig::MultiTask(true);
  const TrainingRun t = TrainTeacher(p.data.manifest, p.cache, p.folds[0], c);
  const SoftLabelSet soft = GenerateSoftLabels(t.checkpoint, p.data.manifest, p.cache, p.folds[0]);
  EXPECT_EQ(soft.fold_id, 0);
  EXPECT_EQ(soft.teacher_hash, t.checkpoint.Hash());
  EXPECT_EQ(soft.videos(), p.folds[0].train_videos);
  EXPECT_EQ(soft.triplet.size(),
            p.data.manifest.FrameIndicesFor(p.folds[0].train_videos).size());
  for (const auto& [key, probs] : soft.triplet) {
    for (double v : probs) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    const AuxSoftLabels& aux = soft.aux.at(key);
    EXPECT_EQ(aux.instrument.size(), 2u);
    double sum = 0.0;
    for (double q : aux.phase) sum += q;
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
  EXPECT_NO_THROW(CheckSoftLabelCoverage(soft, p.data.manifest, p.folds[0]));
  EXPECT_EQ(GenerateSoftLabels(t.checkpoint, p.data.manifest, p.cache, p.folds[0]), soft);
  EXPECT_THROW(GenerateSoftLabels(t.checkpoint, p.data.manifest, p.cache, p.folds[1]),
               ValidationError);
}

TEST(SoftLabelGenerationTest, CoverageErrorsNameTheProblem) {
  TinyProblem p;
  const TrainingRun t = TrainTeacher(p.data.manifest, p.cache, p.folds[0], TinyRunConfig(1, 1));
  SoftLabelSet soft = GenerateSoftLabels(t.checkpoint, p.data.manifest, p.cache, p.folds[0]);

  SoftLabelSet leaked = soft;
  const FrameKey val_key{*p.folds[0].val_videos.begin(), 0};
  leaked.triplet[val_key] = std::vector<double>(soft.num_classes, 0.5);
  try {
    CheckSoftLabelCoverage(leaked, p.data.manifest, p.folds[0]);
    FAIL() << "expected CoverageError";
  } catch (const CoverageError& e) {
    EXPECT_NE(std::string(e.what()).find("validation frame " + val_key.first),
              std::string::npos);
  }

  SoftLabelSet missing = soft;
  const FrameKey dropped = missing.triplet.begin()->first;
  missing.triplet.erase(dropped);
  try {
    CheckSoftLabelCoverage(missing, p.data.manifest, p.folds[0]);
    FAIL() << "expected CoverageError";
  } catch (const CoverageError& e) {
    EXPECT_NE(std::string(e.what()).find("missing " + dropped.first), std::string::npos);
  }
  EXPECT_THROW(TrainStudent(p.data.manifest, p.cache, p.folds[0], missing, TinyRunConfig()),
               CoverageError);
}

TEST(StudentTest, SelectsBestValidationEpoch) {
  TinyProblem p;
  const DistillRunConfig c = TinyRunConfig(1, 4);
  const TrainingRun t = TrainTeacher(p.data.manifest, p.cache, p.folds[2], c);
  const SoftLabelSet soft = GenerateSoftLabels(t.checkpoint, p.data.manifest, p.cache, p.folds[2]);
  const TrainingRun s = TrainStudent(p.data.manifest, p.cache, p.folds[2], soft, c);
  EXPECT_EQ(s.checkpoint.role, "student");
  const int best = SelectBestEpoch(s.checkpoint.curve);
  EXPECT_EQ(s.selected_epoch, best + 1);
  EXPECT_EQ(s.checkpoint.epoch, best + 1);
  for (const EpochLog& e : s.checkpoint.curve) EXPECT_LE(e.val_map, s.checkpoint.val_map);
  MetricOptions o;
  EXPECT_DOUBLE_EQ(TripletMap(s.val_predictions, p.data.manifest, o).map,
                   s.checkpoint.val_map);
}

TEST(StudentTest, AlphaZeroEqualsHardLabelTraining) {
  TinyProblem p;
  DistillRunConfig c = TinyRunConfig(1, 2);
  c.alpha = 0.0;
  c.student = c.teacher;
  c.student.epochs = 2;
  c.student_rule = c.teacher_rule;
  const TrainingRun t = TrainTeacher(p.data.manifest, p.cache, p.folds[0], c);
  const SoftLabelSet soft = GenerateSoftLabels(t.checkpoint, p.data.manifest, p.cache, p.folds[0]);
  const TrainingRun s = TrainStudent(p.data.manifest, p.cache, p.folds[0], soft, c);
  DistillRunConfig as_teacher = c;
  as_teacher.teacher = c.student;
  const TrainingRun h = TrainTeacher(p.data.manifest, p.cache, p.folds[0], as_teacher);
  EXPECT_EQ(s.checkpoint.params, h.checkpoint.params);
}

TEST(FoldProtocolTest, WritesTenCheckpointsAndStatus) {
  TinyProblem p;
  testing::TempDir dir;
  const DistillRunConfig c = TinyRunConfig(1, 1);
  const FoldProtocolResult r =
      RunFoldProtocol(p.data.manifest, p.folds, c, dir.path(), 1, &p.cache);
  ASSERT_EQ(r.folds.size(), 3u);
  for (const FoldArtifacts& f : r.folds) {
    EXPECT_EQ(LoadCheckpoint(f.teacher_path).Hash(), f.teacher_hash);
    EXPECT_EQ(LoadCheckpoint(f.student_path).fold_id, f.fold_id);
    const SoftLabelSet soft = LoadSoftLabels(f.soft_label_path);
    for (const std::string& v : soft.videos()) {
      EXPECT_EQ(p.folds[f.fold_id].val_videos.count(v), 0u);
    }
  }
  const auto status = nlohmann::json::parse(ReadTextFile(dir.file("protocol.json")));
  EXPECT_EQ(status["status"], "ok");
  EXPECT_EQ(status["completed_folds"].size(), 3u);
  // Teachers share one init seed, students another.
  EXPECT_EQ(r.folds[0].teacher.checkpoint.seeds.at("weight_init"),
            r.folds[2].teacher.checkpoint.seeds.at("weight_init"));
}

TEST(FoldProtocolTest, WorkerCountDoesNotChangeResults) {
  TinyProblem p;
  testing::TempDir a, b;
  const DistillRunConfig c = TinyRunConfig(1, 1);
  const auto r1 = RunFoldProtocol(p.data.manifest, p.folds, c, a.path(), 1, &p.cache);
  const auto r3 = RunFoldProtocol(p.data.manifest, p.folds, c, b.path(), 3, &p.cache);
  for (size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(r1.folds[k].teacher_hash, r3.folds[k].teacher_hash);
    EXPECT_EQ(r1.folds[k].student_hash, r3.folds[k].student_hash);
  }
}

TEST(FoldProtocolTest, FailureRecordsPartialProgress) {
  TinyProblem p;
  testing::TempDir dir;
  std::vector<FoldSplit> folds = p.folds;
  folds[1].train_videos.clear();
  EXPECT_THROW(RunFoldProtocol(p.data.manifest, folds, TinyRunConfig(1, 1), dir.path(), 1,
                               &p.cache),
               Error);
  const auto status = nlohmann::json::parse(ReadTextFile(dir.file("protocol.json")));
  EXPECT_EQ(status["status"], "failed");
  EXPECT_EQ(status["failed_fold"], 1);
  EXPECT_EQ(status["completed_folds"], nlohmann::json::array({0}));
}

}  // namespace
}  // namespace sdtriplet
