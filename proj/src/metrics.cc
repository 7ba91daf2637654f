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

#include "gradst/metrics.h"

#include <algorithm>

namespace gradst {

IntentMetrics metric_intent(std::span<const int> preds,
                            std::span<const int> gold,
                            std::optional<int> out_of_scope_class) {
  if (preds.size() != gold.size()) {
    throw MetricError("metric_intent: prediction/gold length mismatch");
  }
  if (gold.empty()) throw MetricError("metric_intent: empty input");
  std::size_t correct = 0, in_total = 0, in_correct = 0;
  std::size_t out_total = 0, out_hit = 0, decision_correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    correct += preds[i] == gold[i];
    const bool gold_out = out_of_scope_class && gold[i] == *out_of_scope_class;
    const bool pred_out =
        out_of_scope_class && preds[i] == *out_of_scope_class;
    if (gold_out) {
      ++out_total;
      out_hit += pred_out;
    } else {
      ++in_total;
      in_correct += preds[i] == gold[i];
    }
    decision_correct += gold_out == pred_out;
  }
  const auto n = static_cast<double>(gold.size());
  IntentMetrics m;
  m.acc_all = static_cast<double>(correct) / n;
  if (in_total) {
    m.acc_in = static_cast<double>(in_correct) / static_cast<double>(in_total);
  }
  if (out_of_scope_class) {
    m.acc_out = static_cast<double>(decision_correct) / n;
    if (out_total) {
      m.recall_out =
          static_cast<double>(out_hit) / static_cast<double>(out_total);
    }
  }
  return m;
}

DstMetrics metric_dst(std::span<const SlotAssignment> preds,
                      std::span<const SlotAssignment> gold) {
  if (preds.size() != gold.size()) {
    throw MetricError("metric_dst: prediction/gold length mismatch");
  }
  if (gold.empty()) throw MetricError("metric_dst: empty input");
  std::size_t joint = 0, slots = 0, slot_hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (preds[i].values.size() != gold[i].values.size()) {
      throw MetricError("metric_dst: pair-set mismatch");
    }
    bool all = true;
    for (std::size_t j = 0; j < gold[i].values.size(); ++j) {
      const bool hit = preds[i].values[j] == gold[i].values[j];
      slot_hits += hit;
      all = all && hit;
      ++slots;
    }
    joint += all;
  }
  DstMetrics m;
  m.joint_acc = static_cast<double>(joint) / static_cast<double>(gold.size());
  m.slot_acc =
      slots ? static_cast<double>(slot_hits) / static_cast<double>(slots) : 0.0;
  return m;
}

F1Metrics metric_f1(std::span<const MultiLabel> preds,
                    std::span<const MultiLabel> gold, std::size_t num_labels) {
  if (num_labels == 0) throw MetricError("metric_f1: no labels");
  if (preds.size() != gold.size()) {
    throw MetricError("metric_f1: prediction/gold length mismatch");
  }
  std::vector<std::size_t> tp(num_labels), fp(num_labels), fn(num_labels);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (preds[i].bits.size() != num_labels ||
        gold[i].bits.size() != num_labels) {
      throw MetricError("metric_f1: label width mismatch");
    }
    for (std::size_t c = 0; c < num_labels; ++c) {
      const bool p = preds[i].bits[c];
      const bool g = gold[i].bits[c];
      tp[c] += p && g;
      fp[c] += p && !g;
      fn[c] += !p && g;
    }
  }
  auto f1 = [](std::size_t t, std::size_t f_p, std::size_t f_n) {
    const std::size_t denom = 2 * t + f_p + f_n;
    return denom ? 2.0 * static_cast<double>(t) / static_cast<double>(denom)
                 : 0.0;
  };
  std::size_t TP = 0, FP = 0, FN = 0;
  double macro = 0.0;
  for (std::size_t c = 0; c < num_labels; ++c) {
    TP += tp[c];
    FP += fp[c];
    FN += fn[c];
    macro += f1(tp[c], fp[c], fn[c]);
  }
  return {f1(TP, FP, FN), macro / static_cast<double>(num_labels)};
}

double metric_recall_at_k(std::span<const Ranking> rankings, std::size_t k) {
  if (rankings.empty()) throw MetricError("metric_recall_at_k: empty input");
  std::size_t hits = 0;
  for (const auto& r : rankings) {
    auto it = std::find(r.order.begin(), r.order.end(), r.truth);
    if (it == r.order.end()) {
      throw MetricError("metric_recall_at_k: true response absent");
    }
    hits += static_cast<std::size_t>(it - r.order.begin()) < k;
  }
  return static_cast<double>(hits) / static_cast<double>(rankings.size());
}

}  // namespace gradst
