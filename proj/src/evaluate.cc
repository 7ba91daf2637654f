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

#include "gradst/evaluate.h"

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "gradst/metrics.h"
#include "gradst/parallel.h"

namespace gradst {

std::string primary_metric_name(TaskKind task) {
  switch (task) {
    case TaskKind::kIntent:
      return "acc_all";
    case TaskKind::kDialogState:
      return "joint_acc";
    case TaskKind::kDialogAct:
      return "micro_f1";
    case TaskKind::kResponseSelection:
      return "recall_at_1";
  }
  return "acc_all";
}

TaskMetrics evaluate(const TaskModel& model, std::span<const Example> examples,
                     const Ontology& ontology, std::uint64_t seed,
                     std::size_t workers) {
  if (examples.empty()) throw MetricError("evaluate: no examples");
  for (const auto& ex : examples) {
    if (!ex.label) throw MetricError("evaluate: unlabeled example " + ex.id);
  }
  const ModelView view(model);
  TaskMetrics out;

  switch (model.task) {
    case TaskKind::kIntent: {
      std::vector<int> preds(examples.size()), gold(examples.size());
      parallel_for(examples.size(), workers, [&](std::size_t i) {
        preds[i] =
            std::get<SingleClass>(view.predict(examples[i].tokens).label).index;
      });
      for (std::size_t i = 0; i < examples.size(); ++i) {
        gold[i] = std::get<SingleClass>(*examples[i].label).index;
      }
      const auto m = metric_intent(preds, gold, ontology.out_of_scope_class);
      out.values["acc_all"] = m.acc_all;
      if (m.acc_in) out.values["acc_in"] = *m.acc_in;
      if (m.acc_out) out.values["acc_out"] = *m.acc_out;
      if (m.recall_out) out.values["recall_out"] = *m.recall_out;
      out.primary_name = primary_metric_name(TaskKind::kIntent);
      break;
    }
    case TaskKind::kDialogState: {
      std::vector<SlotAssignment> preds(examples.size()), gold;
      parallel_for(examples.size(), workers, [&](std::size_t i) {
        preds[i] =
            std::get<SlotAssignment>(view.predict(examples[i].tokens).label);
      });
      for (const auto& ex : examples) {
        gold.push_back(std::get<SlotAssignment>(*ex.label));
      }
      const auto m = metric_dst(preds, gold);
      out.values["joint_acc"] = m.joint_acc;
      out.values["slot_acc"] = m.slot_acc;
      out.primary_name = primary_metric_name(TaskKind::kDialogState);
      break;
    }
    case TaskKind::kDialogAct: {
      std::vector<MultiLabel> preds(examples.size()), gold;
      parallel_for(examples.size(), workers, [&](std::size_t i) {
        preds[i] = std::get<MultiLabel>(view.predict(examples[i].tokens).label);
      });
      for (const auto& ex : examples) {
        gold.push_back(std::get<MultiLabel>(*ex.label));
      }
      const auto m = metric_f1(preds, gold, ontology.da_intents.size());
      out.values["micro_f1"] = m.micro_f1;
      out.values["macro_f1"] = m.macro_f1;
      out.primary_name = primary_metric_name(TaskKind::kDialogAct);
      break;
    }
    case TaskKind::kResponseSelection: {
      const auto& head = std::get<ResponseHead>(model.head);
      std::vector<Ranking> rankings(examples.size());
      parallel_for(examples.size(), workers, [&](std::size_t i) {
        const int truth = std::get<ResponseRef>(*examples[i].label).index;
        Rng rng = Rng(seed).child("rs_eval").child(examples[i].id);
        std::vector<int> others;
        for (int c = 0; c < static_cast<int>(head.pool.size()); ++c) {
          if (c != truth) others.push_back(c);
        }
        const std::size_t count = std::min(head.eval_negatives, others.size());
        for (std::size_t k = 0; k < count; ++k) {
          std::swap(others[k], others[k + rng.below(others.size() - k)]);
        }
        std::vector<int> cands{truth};
        cands.insert(cands.end(), others.begin(), others.begin() + count);
        rankings[i] = {view.rank_candidates(examples[i].tokens, cands), truth};
      });
      out.values["recall_at_1"] = metric_recall_at_k(rankings, 1);
      out.values["recall_at_3"] = metric_recall_at_k(rankings, 3);
      out.primary_name = primary_metric_name(TaskKind::kResponseSelection);
      break;
    }
  }
  out.primary = out.values.at(out.primary_name);
  return out;
}

}  // namespace gradst
