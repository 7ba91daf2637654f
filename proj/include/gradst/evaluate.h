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

#ifndef GRADST_EVALUATE_H_
#define GRADST_EVALUATE_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>

#include "gradst/corpus.h"
#include "gradst/heads.h"

namespace gradst {

// Named metric values for one evaluation pass. `primary` is the value used
// for early stopping and best-student selection: intent acc_all, DST
// joint_acc, dialog-act micro_f1, response selection recall_at_1.
struct TaskMetrics {
  std::string primary_name;
  double primary = 0.0;
  std::map<std::string, double> values;
};

std::string primary_metric_name(TaskKind task);

// Response selection ranks the truth against eval_negatives candidates
// sampled per example from (seed, example id).
TaskMetrics evaluate(const TaskModel& model, std::span<const Example> examples,
                     const Ontology& ontology, std::uint64_t seed = 0,
                     std::size_t workers = 1);

}  // namespace gradst

#endif  // GRADST_EVALUATE_H_
