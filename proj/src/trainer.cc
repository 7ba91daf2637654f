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

#include "gradst/trainer.h"

#include <algorithm>
#include <numeric>

#include "gradst/evaluate.h"

namespace gradst {

FitResult fit(TaskModel model, std::span<const Example> train,
              std::span<const Example> validation, const Ontology& ontology,
              const TrainOptions& options, Rng rng) {
  if (train.empty()) throw InvalidInput("fit: empty training set");
  if (validation.empty()) throw InvalidInput("fit: validation split empty");
  if (options.batch_size == 0) throw InvalidInput("fit: zero batch size");

  FitResult best{model, {}};
  bool have_best = false;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<const Example*> batch;

  for (std::size_t epoch = 1; epoch <= options.max_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(i)]);
    }
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += options.batch_size) {
      batch.clear();
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      for (std::size_t i = start; i < end; ++i) batch.push_back(&train[order[i]]);
      loss_sum += train_step(model, batch, options.learning_rate, rng);
      ++batches;
    }
    const double metric = evaluate(model, validation, ontology,
                                   options.eval_seed, options.workers)
                              .primary;
    best.report.epochs_run = epoch;
    best.report.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
    best.report.validation_metric.push_back(metric);
    if (!have_best || metric > best.report.best_metric) {
      have_best = true;
      best.model = model;
      best.report.best_metric = metric;
      best.report.best_epoch = epoch;
    }
    if (epoch - best.report.best_epoch >= options.patience) break;
  }
  return best;
}

}  // namespace gradst
