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

#include "gradst/selfcheck.h"

#include <algorithm>
#include <cmath>

#include "gradst/gradaug.h"
#include "gradst/numeric.h"

namespace gradst {

namespace {

Tokens random_phrase(Rng& rng, std::size_t vocab_size) {
  Tokens t(1 + rng.below(3));
  for (auto& id : t) {
    id = static_cast<TokenId>(Vocab::kNumReserved +
                              rng.below(vocab_size - Vocab::kNumReserved));
  }
  return t;
}

Mat random_embeddings(Rng& rng, std::size_t n, std::size_t d) {
  Mat x(n, d);
  for (auto& v : x.flat()) v = rng.normal();
  return x;
}

CheckResult gradient_check(TaskKind task, std::uint64_t seed) {
  Rng rng = Rng(seed).child("gradient").child(task_kind_name(task));
  double worst = 0.0;
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t d = 2 + rng.below(7);
    const std::size_t n = 1 + rng.below(6);
    const TaskModel model = make_probe_model(task, 16, d, 2 + rng.below(7), rng);
    const LabelValue y = random_label(model, rng);
    const ModelView view(model);
    const Mat x = random_embeddings(rng, n, d);
    const Mat analytic = view.grad_wrt_token_embeddings(x, y);
    const Vec fd = finite_difference_grad(
        [&](std::span<const double> flat) {
          return view.scalar_score_for_label(
              Mat(n, d, Vec(flat.begin(), flat.end())), y);
        },
        x.flat(), 1e-5);
    worst = std::max(worst, relative_error(analytic.flat(), fd));
  }
  return {"gradient_" + std::string(task_kind_name(task)), worst < 1e-4, worst,
          1e-4};
}

}  // namespace

TaskModel make_probe_model(TaskKind task, std::size_t vocab_size,
                           std::size_t embed_dim, std::size_t hidden_dim,
                           Rng& rng) {
  ModelBlueprint bp;
  bp.task = task;
  bp.vocab_size = vocab_size;
  switch (task) {
    case TaskKind::kIntent:
    case TaskKind::kDialogAct:
      bp.num_outputs = 2 + rng.below(4);
      break;
    case TaskKind::kDialogState:
      bp.slot_values.resize(1 + rng.below(3));
      for (auto& values : bp.slot_values) {
        values.resize(2 + rng.below(3));
        for (auto& v : values) v = random_phrase(rng, vocab_size);
      }
      break;
    case TaskKind::kResponseSelection:
      bp.responses.resize(3 + rng.below(5));
      for (auto& r : bp.responses) r = random_phrase(rng, vocab_size);
      break;
  }
  ModelShape shape;
  shape.embed_dim = embed_dim;
  shape.hidden_dim = hidden_dim;
  shape.dropout_rate = 0.0;
  shape.similarity_scale = 1.0 + 4.0 * rng.uniform();
  TaskModel m = init_model(bp, shape, rng());
  // Break the zero bias so tanh is exercised away from the origin.
  for (auto& b : m.encoder.bias) b = 0.3 * rng.normal();
  return m;
}

LabelValue random_label(const TaskModel& model, Rng& rng) {
  return std::visit(
      [&](const auto& head) -> LabelValue {
        using H = std::decay_t<decltype(head)>;
        if constexpr (std::is_same_v<H, IntentHead>) {
          return SingleClass{
              static_cast<int>(rng.below(head.weight.rows()))};
        } else if constexpr (std::is_same_v<H, DialogActHead>) {
          MultiLabel l;
          l.bits.resize(head.weight.rows());
          for (auto& b : l.bits) b = rng.below(2);
          return l;
        } else if constexpr (std::is_same_v<H, DialogStateHead>) {
          SlotAssignment a;
          for (const auto& values : head.values) {
            a.values.push_back(static_cast<int>(rng.below(values.size())));
          }
          return a;
        } else {
          return ResponseRef{static_cast<int>(rng.below(head.pool.size()))};
        }
      },
      model.head);
}

std::vector<CheckResult> run_self_checks(std::uint64_t seed) {
  std::vector<CheckResult> out;
  for (auto task : {TaskKind::kIntent, TaskKind::kDialogAct,
                    TaskKind::kDialogState, TaskKind::kResponseSelection}) {
    out.push_back(gradient_check(task, seed));
  }

  {
    Rng rng = Rng(seed).child("smooth");
    double worst = 0.0;
    GradAugConfig cfg;
    cfg.noise_variance = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      const TaskModel model =
          make_probe_model(TaskKind::kIntent, 16, 4, 4, rng);
      const LabelValue y = random_label(model, rng);
      Tokens tokens = random_phrase(rng, 16);
      tokens.push_back(Vocab::kNumReserved);
      const ModelView view(model);
      Rng noise = rng.child("noise");
      const Vec smooth = smooth_saliency(view, tokens, y, cfg, noise);
      const Vec plain = saliency(view, tokens, y);
      for (std::size_t i = 0; i < plain.size(); ++i) {
        worst = std::max(worst, std::abs(smooth[i] - plain[i]));
      }
    }
    out.push_back({"smooth_saliency_zero_variance", worst < 1e-12, worst,
                   1e-12});
  }

  {
    Rng rng = Rng(seed).child("masking");
    double worst = 0.0;
    for (int trial = 0; trial < 10000; ++trial) {
      Vec m(1 + rng.below(12));
      const auto kind = rng.below(4);
      for (auto& v : m) {
        v = kind == 0 ? 0.0 : (kind == 1 ? -rng.uniform() : rng.normal());
      }
      const Vec p = masking_probability(m, 1.0, 1e-6);
      double sum = 0.0;
      for (double v : p) sum += v;
      worst = std::max(worst, std::abs(sum - 1.0));
    }
    out.push_back({"masking_probability_sum", worst < 1e-12, worst, 1e-12});
  }

  {
    // Inclusion frequencies of a 2-of-4 draw against exact enumeration of
    // ordered draws.
    const Vec p = {0.1, 0.2, 0.3, 0.4};
    Vec exact(p.size(), 0.0);
    for (std::size_t a = 0; a < p.size(); ++a) {
      for (std::size_t b = 0; b < p.size(); ++b) {
        if (a == b) continue;
        const double pr = p[a] * p[b] / (1.0 - p[a]);
        exact[a] += pr;
        exact[b] += pr;
      }
    }
    Rng rng = Rng(seed).child("sampler");
    Vec counts(p.size(), 0.0);
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
      for (auto idx : sample_without_replacement(p, 2, rng)) counts[idx] += 1;
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      worst = std::max(worst, std::abs(counts[i] / draws - exact[i]));
    }
    out.push_back({"masking_sampler_inclusion", worst < 0.01, worst, 0.01});
  }
  return out;
}

}  // namespace gradst
