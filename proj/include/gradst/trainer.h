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

#ifndef GRADST_TRAINER_H_
#define GRADST_TRAINER_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gradst/corpus.h"
#include "gradst/heads.h"

namespace gradst {

struct TrainOptions {
  double learning_rate = 0.1;
  std::size_t batch_size = 8;
  std::size_t max_epochs = 200;
  // Stop once this many epochs pass without a validation improvement.
  std::size_t patience = 20;
  std::uint64_t eval_seed = 0;
  std::size_t workers = 1;
};

struct FitReport {
  std::size_t epochs_run = 0;
  // 1-based; 0 only if no epoch ran.
  std::size_t best_epoch = 0;
  double best_metric = 0.0;
  std::vector<double> epoch_loss;
  std::vector<double> validation_metric;
};

struct FitResult {
  // Checkpoint from the best validation epoch.
  TaskModel model;
  FitReport report;
};

// Minibatch SGD with per-epoch shuffling and early stopping on the primary
// validation metric. Throws InvalidInput when train or validation is empty;
// TrainingDiverged propagates from train_step.
FitResult fit(TaskModel model, std::span<const Example> train,
              std::span<const Example> validation, const Ontology& ontology,
              const TrainOptions& options, Rng rng);

}  // namespace gradst

#endif  // GRADST_TRAINER_H_
