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

#ifndef GRADST_METRICS_H_
#define GRADST_METRICS_H_

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "gradst/corpus.h"

namespace gradst {

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct IntentMetrics {
  double acc_all = 0.0;
  // Absent when no gold example is in-domain.
  std::optional<double> acc_in;
  // Binary accuracy of the in-scope / out-of-scope decision. Absent without
  // an out-of-scope class.
  std::optional<double> acc_out;
  // Absent when no gold example is out-of-scope.
  std::optional<double> recall_out;
};

IntentMetrics metric_intent(std::span<const int> preds,
                            std::span<const int> gold,
                            std::optional<int> out_of_scope_class);

struct DstMetrics {
  double joint_acc = 0.0;
  double slot_acc = 0.0;
};

DstMetrics metric_dst(std::span<const SlotAssignment> preds,
                      std::span<const SlotAssignment> gold);

struct F1Metrics {
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
};

// Classes with no gold and no predicted positives contribute an F1 of 0 to
// the macro average; micro F1 with no positives anywhere is 0.
F1Metrics metric_f1(std::span<const MultiLabel> preds,
                    std::span<const MultiLabel> gold, std::size_t num_labels);

struct Ranking {
  std::vector<int> order;  // candidate ids, best first
  int truth = 0;
};

// Fraction of rankings whose true candidate sits within the first k.
double metric_recall_at_k(std::span<const Ranking> rankings, std::size_t k);

}  // namespace gradst

#endif  // GRADST_METRICS_H_
