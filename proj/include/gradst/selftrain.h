// Copyright 2026 The gradst Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Teacher/student self-training: warm up a teacher on the labeled pool,
// then repeatedly pseudo-label the unlabeled pool, move a selection of it
// into the labeled pool, augment, and train a freshly initialised student
// that becomes the next teacher. The best model on validation is returned.

#ifndef GRADST_SELFTRAIN_H_
#define GRADST_SELFTRAIN_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gradst/corpus.h"
#include "gradst/evaluate.h"
#include "gradst/gradaug.h"
#include "gradst/heads.h"
#include "gradst/mlm.h"
#include "gradst/trainer.h"
#include "json.hpp"

namespace gradst {

enum class SelectorKind { kTopK, kRandomK, kLeastK, kSelectAll };

std::string_view selector_name(SelectorKind kind);
SelectorKind parse_selector(std::string_view name);

struct STConfig {
  // Pseudo-labeled examples moved into L per iteration (ignored by
  // SelectAll).
  std::size_t k = 100;
  SelectorKind selector = SelectorKind::kTopK;
  std::size_t warmup_patience = 20;
  std::size_t inner_patience = 10;
  // Iterations without a new best validation metric before stopping.
  std::size_t outer_patience = 3;
  std::size_t max_iterations = 20;
  std::size_t warmup_max_epochs = 300;
  std::size_t student_max_epochs = 100;
  double learning_rate = 0.5;
  std::size_t batch_size = 8;
  ModelShape shape;
  // Teacher and Student token embeddings start from the MLM's input
  // embeddings, rescaled to this root-mean-square value. 0 keeps the random
  // initialization (also used when the context has no MLM).
  double pretrained_embedding_rms = 0.3;
  GradAugConfig gradaug;
  bool use_augmentation = true;
  bool use_pseudo_labeling = true;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

void validate(const STConfig& config);
nlohmann::json to_json(const STConfig& config);

enum class Provenance { kGold, kPseudo };

struct LabeledEntry {
  Example example;
  Provenance provenance = Provenance::kGold;
  // Iteration in which a pseudo-label was assigned; 0 for gold.
  std::size_t iteration = 0;
};

struct Pools {
  std::vector<LabeledEntry> labeled;
  std::vector<Example> unlabeled;
  // SelectAll only: pseudo-labeled this iteration, relabeled next one.
  std::vector<LabeledEntry> relabelable;

  std::vector<Example> training_set() const;
};

Pools make_pools(std::span<const Example> labeled,
                 std::span<const Example> unlabeled);

struct PseudoLabeled {
  std::size_t index = 0;  // into the pseudo-labeled input span
  std::string id;
  LabelValue label;
  double confidence = 0.0;
  std::size_t iteration = 0;

  bool operator==(const PseudoLabeled&) const = default;
};

// Everything the loop reads but never modifies.
struct STContext {
  const ModelBlueprint* blueprint = nullptr;
  std::span<const Example> validation;
  const Ontology* ontology = nullptr;
  const MlmModel* mlm = nullptr;
  // Evaluation-only ground truth of U, used for precision reporting.
  const SealedLabels* sealed = nullptr;
};

FitResult warmup_teacher(const Pools& pools, const STContext& context,
                         const STConfig& config);

// Teacher predictions for every element of pool, sorted by descending
// confidence with ties broken by id. Failures are rethrown with the id.
std::vector<PseudoLabeled> pseudo_label(const TaskModel& teacher,
                                        std::span<const Example> pool,
                                        std::size_t iteration,
                                        std::size_t workers = 1);

std::vector<PseudoLabeled> select(const std::vector<PseudoLabeled>& priority,
                                  const STConfig& config, Rng& rng);

struct IterationReport {
  std::size_t iteration = 0;
  bool ok = true;
  std::string error;
  std::size_t labeled = 0;
  std::size_t unlabeled = 0;
  std::size_t relabelable = 0;
  std::size_t selected = 0;
  double selected_mean_confidence = 0.0;
  std::optional<double> pseudo_label_precision;
  std::size_t augmented = 0;
  std::size_t augmentation_failures = 0;
  std::size_t student_epochs = 0;
  double validation_metric = 0.0;
  double wall_ms = 0.0;
};

struct IterationOutcome {
  TaskModel teacher;
  IterationReport report;
};

// One loop body: pseudo-label, select, update pools, augment the whole
// labeled pool, train a re-initialised student and hand it over. On
// TrainingDiverged the report is marked failed and the old teacher kept.
IterationOutcome st_iteration(Pools& pools, const TaskModel& teacher,
                              const STContext& context, const STConfig& config,
                              std::size_t iteration);

struct RunReport {
  nlohmann::json config;
  double warmup_validation_metric = 0.0;
  std::size_t warmup_epochs = 0;
  std::size_t warmup_best_epoch = 0;
  std::vector<IterationReport> iterations;
  // 0 is the warm-up teacher.
  std::size_t best_iteration = 0;
  double best_validation_metric = 0.0;
  std::string stop_reason;
  std::optional<TaskMetrics> test_metrics;
  std::optional<TaskMetrics> warmup_test_metrics;
  std::string timestamp;

  // Without timing, the document is a pure function of (data, config).
  nlohmann::json to_json(bool include_timing = true) const;
};

struct RunResult {
  TaskModel best;
  TaskModel warmup;
  RunReport report;
};

// A precomputed warm-up may be passed to share it between runs with the
// same seed.
RunResult run(std::span<const Example> labeled,
              std::span<const Example> unlabeled, const STContext& context,
              const STConfig& config, const FitResult* warmup = nullptr);

}  // namespace gradst

#endif  // GRADST_SELFTRAIN_H_
