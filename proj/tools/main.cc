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

// sdtriplet: command-line front end for dataset generation, the
// teacher/student protocol, ensembling, evaluation and the ablation ladder.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sdtriplet/analysis.h"
#include "sdtriplet/checkpoint.h"
#include "sdtriplet/datagen.h"
#include "sdtriplet/distill.h"
#include "sdtriplet/ensemble.h"
#include "sdtriplet/errors.h"
#include "sdtriplet/experiment.h"
#include "sdtriplet/metrics.h"
#include "sdtriplet/predictions.h"
#include "sdtriplet/soft_labels.h"
#include "sdtriplet/util.h"

namespace fs = std::filesystem;
using namespace sdtriplet;

namespace {

// Flags shared by every subcommand.
struct CommonFlags {
  std::string config;
  std::string out;
  int workers = 1;
  std::vector<std::string> sets;
  std::map<std::string, uint64_t> seeds;
};

void AddCommon(CLI::App* cmd, CommonFlags& f, bool out_required) {
  cmd->add_option("--config", f.config, "Experiment config (YAML or JSON)")
      ->check(CLI::ExistingFile);
  auto* out = cmd->add_option("--out", f.out, "Output path");
  if (out_required) out->required();
  cmd->add_option("--workers", f.workers, "Parallel folds/members")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--set", f.sets, "Config override, e.g. student.epochs=20");
  for (const char* name : {"teacher_init", "student_init", "data", "noise", "baseline"}) {
    cmd->add_option_function<uint64_t>(
        std::string("--seed.") + name,
        [&f, name](const uint64_t& v) { f.seeds[name] = v; },
        std::string("Seed override: ") + name);
  }
}

ExperimentConfig ResolveConfig(const CommonFlags& f) {
  std::vector<ConfigOverride> overrides;
  for (const std::string& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects path=value, got '" + s + "'");
    overrides.push_back({s.substr(0, eq), s.substr(eq + 1)});
  }
  for (const auto& [name, value] : f.seeds) {
    overrides.push_back({"seeds." + name, std::to_string(value)});
  }
  if (f.config.empty()) return ParseExperimentConfig("{}", "<defaults>", "", overrides);
  return LoadExperimentConfig(f.config, overrides);
}

FoldSplit FindFold(const std::string& folds_path, int fold_id) {
  for (const FoldSplit& f : ParseFoldSplits(ReadTextFile(folds_path), folds_path)) {
    if (f.fold_id == fold_id) return f;
  }
  throw ValidationError("fold " + std::to_string(fold_id) + " not in " + folds_path);
}

DatasetManifest LoadData(const std::string& path, const std::string& vocab_path = "") {
  if (vocab_path.empty()) return LoadManifest(path);
  auto vocab = std::make_shared<const TripletVocabulary>(LoadVocabulary(vocab_path));
  DatasetManifest m = ParseManifest(ReadTextFile(path), vocab, path);
  m.set_base_dir(fs::path(path).parent_path().string());
  return m;
}

void PrintCurve(const Checkpoint& c) {
  for (const EpochLog& e : c.curve) {
    std::printf("epoch %3d  loss %.5f  val_mAP %.4f  lr %.3g%s\n", e.epoch, e.train_loss,
                e.val_map, e.lr_end, e.epoch == c.epoch ? "  <- kept" : "");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-distillation toolkit for multi-label action triplet recognition"};
  app.require_subcommand(1);

  // make-synthetic
  CommonFlags synth_flags;
  auto* synth = app.add_subcommand("make-synthetic", "Generate a synthetic dataset");
  AddCommon(synth, synth_flags, true);

  // split
  CommonFlags split_flags;
  std::string split_data;
  auto* split = app.add_subcommand("split", "Video-level k-fold split");
  AddCommon(split, split_flags, true);
  split->add_option("--data", split_data, "Manifest")->required()->check(CLI::ExistingFile);

  // train-teacher / train-student / gen-soft-labels share these.
  struct FoldArgs {
    std::string data, folds, multitask = "ivtp", backbone;
    int fold = 0;
  };
  const auto add_fold_args = [](CLI::App* cmd, FoldArgs& a) {
    cmd->add_option("--data", a.data, "Manifest")->required()->check(CLI::ExistingFile);
    cmd->add_option("--folds", a.folds, "Fold file from 'split'")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--fold", a.fold, "Fold id")->required();
  };
  const auto add_model_args = [](CLI::App* cmd, FoldArgs& a) {
    cmd->add_option("--multitask", a.multitask, "Auxiliary heads: none|ivt|ivtp")
        ->capture_default_str();
    cmd->add_option("--backbone", a.backbone, "Registry backbone (default: config)");
  };

  CommonFlags teacher_flags;
  FoldArgs teacher_args;
  auto* teacher = app.add_subcommand("train-teacher", "Train a fold teacher on hard labels");
  AddCommon(teacher, teacher_flags, true);
  add_fold_args(teacher, teacher_args);
  add_model_args(teacher, teacher_args);

  CommonFlags soft_flags;
  FoldArgs soft_args;
  std::string soft_teacher;
  double soft_epsilon = 0.0;
  auto* gen_soft =
      app.add_subcommand("gen-soft-labels", "Teacher probabilities on its training split");
  AddCommon(gen_soft, soft_flags, true);
  add_fold_args(gen_soft, soft_args);
  gen_soft->add_option("--teacher", soft_teacher, "Teacher checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  gen_soft->add_option("--epsilon", soft_epsilon, "Label smoothing applied to the output")
      ->capture_default_str();

  CommonFlags student_flags;
  FoldArgs student_args;
  std::string student_soft;
  auto* student = app.add_subcommand("train-student", "Train a fold student on soft labels");
  AddCommon(student, student_flags, true);
  add_fold_args(student, student_args);
  add_model_args(student, student_args);
  student->add_option("--soft", student_soft, "Soft-label file")
      ->required()
      ->check(CLI::ExistingFile);

  CommonFlags folds_flags;
  FoldArgs folds_args;
  auto* run_folds =
      app.add_subcommand("run-folds", "Teacher, soft labels and student for every fold");
  AddCommon(run_folds, folds_flags, true);
  run_folds->add_option("--data", folds_args.data, "Manifest")
      ->required()
      ->check(CLI::ExistingFile);
  run_folds->add_option("--folds", folds_args.folds, "Fold file from 'split'")
      ->required()
      ->check(CLI::ExistingFile);
  add_model_args(run_folds, folds_args);

  CommonFlags ens_flags;
  std::string ens_spec, ens_data, ens_format = "csv";
  auto* ens = app.add_subcommand("ensemble-infer", "Fold- and member-averaged predictions");
  AddCommon(ens, ens_flags, true);
  ens->add_option("--spec", ens_spec, "Ensemble spec")->required()->check(CLI::ExistingFile);
  ens->add_option("--data", ens_data, "Manifest")->required()->check(CLI::ExistingFile);
  ens->add_option("--format", ens_format, "csv|jsonl")->capture_default_str();

  CommonFlags eval_flags;
  std::string eval_pred, eval_data, eval_mode = "global", eval_labels = "observed",
                                    eval_rule = "any", eval_per_video;
  bool eval_strict = false;
  int eval_k = 5;
  auto* eval = app.add_subcommand("evaluate", "mAP, component mAP and top-K of predictions");
  AddCommon(eval, eval_flags, false);
  eval->add_option("--pred", eval_pred, "Prediction file")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--data", eval_data, "Manifest")->required()->check(CLI::ExistingFile);
  eval->add_option("--mode", eval_mode, "global|per_video")->capture_default_str();
  eval->add_option("--labels", eval_labels, "observed|clean")->capture_default_str();
  eval->add_flag("--strict", eval_strict, "Score classes without positives as 0");
  eval->add_option("--top-k", eval_k, "K for top-K accuracy")->capture_default_str();
  eval->add_option("--rule", eval_rule, "Top-K hit rule any|all")->capture_default_str();
  eval->add_option("--per-video", eval_per_video, "Write the per-video table here");

  CommonFlags ana_flags;
  std::string ana_soft, ana_data, ana_vocab;
  bool ana_replace = false;
  auto* ana = app.add_subcommand("analyze-soft-labels",
                                 "Component match of top-5 soft labels vs random baseline");
  AddCommon(ana, ana_flags, false);
  ana->add_option("--soft", ana_soft, "Soft-label file")->required()->check(CLI::ExistingFile);
  ana->add_option("--data", ana_data, "Manifest")->required()->check(CLI::ExistingFile);
  ana->add_option("--vocab", ana_vocab, "Vocabulary (default: manifest header)")
      ->check(CLI::ExistingFile);
  ana->add_flag("--with-replacement", ana_replace, "Baseline draws with replacement");

  CommonFlags abl_flags;
  auto* abl = app.add_subcommand("run-ablation", "Backbone, +multi-task, +self-distillation, +ensemble");
  AddCommon(abl, abl_flags, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      const ExperimentConfig config = ResolveConfig(synth_flags);
      const DatasetManifest m = BuildDataset(config);
      SaveVocabulary(m.vocab(), (fs::path(synth_flags.out) / "vocab.txt").string());
      SaveManifest(m, (fs::path(synth_flags.out) / "manifest.txt").string());
      std::printf("%zu frames, %zu videos, %d classes -> %s\n", m.frames().size(),
                  m.videos().size(), m.num_classes(), synth_flags.out.c_str());
    } else if (split->parsed()) {
      const ExperimentConfig config = ResolveConfig(split_flags);
      const auto folds = MakeFoldSplits(LoadManifest(split_data), config.folds,
                                        SplitSeed(config.seeds));
      WriteTextFile(split_flags.out, FormatFoldSplits(folds));
      for (const FoldSplit& f : folds) {
        std::printf("fold %d: %zu train / %zu val videos\n", f.fold_id,
                    f.train_videos.size(), f.val_videos.size());
      }
    } else if (teacher->parsed() || student->parsed()) {
      const bool is_teacher = teacher->parsed();
      const CommonFlags& flags = is_teacher ? teacher_flags : student_flags;
      const FoldArgs& a = is_teacher ? teacher_args : student_args;
      const ExperimentConfig config = ResolveConfig(flags);
      const DatasetManifest m = LoadData(a.data);
      const FoldSplit fold = FindFold(a.folds, a.fold);
      const DistillRunConfig d = MakeRunConfig(
          config, config.ResolveBackbone(a.backbone.empty() ? config.backbone.name : a.backbone),
          ParseMultiTaskSet(a.multitask), config.epsilon);
      FrameImageCache images(m);
      const TrainingRun run =
          is_teacher ? TrainTeacher(m, images, fold, d)
                     : TrainStudent(m, images, fold, LoadSoftLabels(student_soft), d);
      SaveCheckpoint(run.checkpoint, flags.out);
      PrintCurve(run.checkpoint);
      std::printf("%s checkpoint %s (sha256 %s)\n", run.checkpoint.role.c_str(),
                  flags.out.c_str(), run.checkpoint.Hash().c_str());
    } else if (gen_soft->parsed()) {
      const DatasetManifest m = LoadData(soft_args.data);
      FrameImageCache images(m);
      const SoftLabelSet soft =
          SmoothSoftLabels(GenerateSoftLabels(LoadCheckpoint(soft_teacher), m, images,
                                              FindFold(soft_args.folds, soft_args.fold)),
                           soft_epsilon);
      SaveSoftLabels(soft, soft_flags.out);
      std::printf("%zu frames -> %s\n", soft.triplet.size(), soft_flags.out.c_str());
    } else if (run_folds->parsed()) {
      const ExperimentConfig config = ResolveConfig(folds_flags);
      const DatasetManifest m = LoadData(folds_args.data);
      const DistillRunConfig d = MakeRunConfig(
          config,
          config.ResolveBackbone(folds_args.backbone.empty() ? config.backbone.name
                                                             : folds_args.backbone),
          ParseMultiTaskSet(folds_args.multitask), config.epsilon);
      const FoldProtocolResult r =
          RunFoldProtocol(m, ParseFoldSplits(ReadTextFile(folds_args.folds), folds_args.folds),
                          d, folds_flags.out, folds_flags.workers);
      for (const FoldArtifacts& f : r.folds) {
        std::printf("fold %d: teacher val_mAP %.4f, student val_mAP %.4f (epoch %d)\n",
                    f.fold_id, f.teacher.checkpoint.val_map, f.student.checkpoint.val_map,
                    f.student.selected_epoch);
      }
    } else if (ens->parsed()) {
      const DatasetManifest m = LoadData(ens_data);
      FrameImageCache images(m);
      const EnsembleOutput out =
          EnsemblePredict(LoadEnsembleSpec(ens_spec), m, images, ens_flags.workers);
      ExportPredictions(out.ensemble, ens_flags.out, ParsePredictionFormat(ens_format));
      std::printf("%zu frames -> %s\n", out.ensemble.size(), ens_flags.out.c_str());
    } else if (eval->parsed()) {
      const DatasetManifest m = LoadData(eval_data);
      MetricOptions options;
      options.mode = ParseMapMode(eval_mode);
      options.labels = ParseLabelSource(eval_labels);
      options.undefined_as_zero = eval_strict;
      options.top_k = eval_k;
      options.top_k_rule = ParseTopKRule(eval_rule);
      const EvalReport report = Evaluate(ImportPredictions(eval_pred), m, options);
      const std::string json = EvalReportToJson(report);
      if (eval_flags.out.empty()) {
        std::fputs(json.c_str(), stdout);
      } else {
        WriteTextFile(eval_flags.out, json);
      }
      if (!eval_per_video.empty()) WriteTextFile(eval_per_video, PerVideoTableCsv(report.per_video));
    } else if (ana->parsed()) {
      const ExperimentConfig config = ResolveConfig(ana_flags);
      const DatasetManifest m = LoadData(ana_data, ana_vocab);
      BaselineOptions options;
      options.with_replacement = ana_replace;
      options.rng_seed = config.seeds.baseline;
      const SimilarityReport report = AnalyzeSoftLabels(m, LoadSoftLabels(ana_soft), options);
      const std::string json = SimilarityReportToJson(report);
      if (ana_flags.out.empty()) {
        std::fputs(json.c_str(), stdout);
      } else {
        WriteTextFile((fs::path(ana_flags.out) / "similarity.json").string(), json);
        WriteTextFile((fs::path(ana_flags.out) / "similarity_frames.csv").string(),
                      SimilarityDetailCsv(report, m.vocab()));
      }
    } else if (abl->parsed()) {
      ExperimentConfig config = ResolveConfig(abl_flags);
      if (!abl_flags.out.empty()) config.output_dir = abl_flags.out;
      const AblationReport report = RunAblation(config, abl_flags.workers);
      if (!config.output_dir.empty()) EmitReport(report, config.output_dir);
      std::fputs(FormatReportText(report).c_str(), stdout);
      for (const RungResult& r : report.rungs) {
        if (!r.ok) return 1;
      }
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
