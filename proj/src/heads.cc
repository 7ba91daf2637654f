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

#include "gradst/heads.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace gradst {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

Mat random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
  Mat m(rows, cols);
  for (double& v : m.flat()) v = scale * rng.normal();
  return m;
}

// Forward state of one encoded token sequence, kept for backprop.
struct Encoded {
  Mat x;
  EncoderCache cache;
  Vec h;
};

Encoded encode_with_cache(const EncoderParams& enc,
                          std::span<const TokenId> tokens,
                          const DropoutMask* mask = nullptr) {
  Encoded e;
  e.x = embed(enc, tokens);
  e.h = encode(enc, e.x, mask, &e.cache);
  return e;
}

void backprop_encoded(const EncoderParams& enc, const Encoded& e,
                      std::span<const TokenId> tokens,
                      std::span<const double> grad_h, EncoderParams& grads) {
  Mat gx = encode_backward(enc, e.x, e.cache, grad_h, &grads);
  scatter_embedding_grad(gx, tokens, grads.embeddings);
}

// Slot value encodings shared by a batch of DST examples.
struct ValueBank {
  std::vector<std::vector<Encoded>> enc;
  std::vector<std::vector<Vec>> grad;
};

ValueBank build_value_bank(const TaskModel& model) {
  const auto& head = std::get<DialogStateHead>(model.head);
  ValueBank bank;
  for (const auto& values : head.values) {
    bank.enc.emplace_back();
    bank.grad.emplace_back();
    for (const auto& v : values) {
      bank.enc.back().push_back(encode_with_cache(model.encoder, v));
      bank.grad.back().emplace_back(model.encoder.hidden_dim(), 0.0);
    }
  }
  return bank;
}

void flush_value_bank(const TaskModel& model, const ValueBank& bank,
                      EncoderParams& grads) {
  const auto& head = std::get<DialogStateHead>(model.head);
  for (std::size_t j = 0; j < bank.enc.size(); ++j) {
    for (std::size_t i = 0; i < bank.enc[j].size(); ++i) {
      backprop_encoded(model.encoder, bank.enc[j][i], head.values[j][i],
                       bank.grad[j][i], grads);
    }
  }
}

std::vector<std::size_t> sample_negatives(std::size_t pool, std::size_t truth,
                                          std::size_t count, Rng& rng) {
  std::vector<std::size_t> others;
  others.reserve(pool - 1);
  for (std::size_t i = 0; i < pool; ++i) {
    if (i != truth) others.push_back(i);
  }
  count = std::min(count, others.size());
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(others[i], others[i + rng.below(others.size() - i)]);
  }
  others.resize(count);
  return others;
}

// Loss of one example; value_bank must be non-null for DST.
double loss_impl(const TaskModel& model, std::span<const TokenId> tokens,
                 const LabelValue& label, Rng* rng, TaskModel* grads,
                 ValueBank* value_bank) {
  DropoutMask mask;
  if (rng && model.encoder.dropout_rate > 0.0) {
    mask = sample_dropout_mask(model.encoder, *rng);
  }
  Encoded ctx =
      encode_with_cache(model.encoder, tokens, mask.empty() ? nullptr : &mask);
  const std::size_t l = model.encoder.hidden_dim();
  Vec grad_h(l, 0.0);
  double loss = 0.0;

  std::visit(
      Overloaded{
          [&](const IntentHead& head) {
            const int y = std::get<SingleClass>(label).index;
            Vec p = softmax(matvec(head.weight, ctx.h));
            loss = cross_entropy(p, static_cast<std::size_t>(y));
            if (!grads) return;
            p[y] -= 1.0;
            add_outer(std::get<IntentHead>(grads->head).weight, p, ctx.h);
            grad_h = matvec_transposed(head.weight, p);
          },
          [&](const DialogActHead& head) {
            const auto& bits = std::get<MultiLabel>(label).bits;
            Vec z = matvec(head.weight, ctx.h);
            Vec a(z.size());
            for (std::size_t n = 0; n < z.size(); ++n) a[n] = sigmoid(z[n]);
            loss = binary_cross_entropy(a, bits);
            if (!grads) return;
            const double inv = 1.0 / static_cast<double>(a.size());
            for (std::size_t n = 0; n < a.size(); ++n) {
              z[n] = (a[n] - (bits[n] ? 1.0 : 0.0)) * inv;
            }
            add_outer(std::get<DialogActHead>(grads->head).weight, z, ctx.h);
            grad_h = matvec_transposed(head.weight, z);
          },
          [&](const DialogStateHead& head) {
            const auto& y = std::get<SlotAssignment>(label).values;
            auto* g = grads ? &std::get<DialogStateHead>(grads->head) : nullptr;
            for (std::size_t j = 0; j < head.projections.size(); ++j) {
              Vec u = matvec(head.projections[j], ctx.h);
              const auto& values = value_bank->enc[j];
              std::vector<CosineGrad> cg;
              Vec logits(values.size());
              for (std::size_t i = 0; i < values.size(); ++i) {
                cg.push_back(cosine_with_grad(u, values[i].h));
                logits[i] = model.similarity_scale * cg.back().value;
              }
              Vec p = softmax(logits);
              loss += cross_entropy(p, static_cast<std::size_t>(y[j]));
              if (!g) continue;
              p[y[j]] -= 1.0;
              Vec du(l, 0.0);
              for (std::size_t i = 0; i < values.size(); ++i) {
                const double ds = model.similarity_scale * p[i];
                axpy(ds, cg[i].du, du);
                axpy(ds, cg[i].dv, value_bank->grad[j][i]);
              }
              add_outer(g->projections[j], du, ctx.h);
              Vec dh = matvec_transposed(head.projections[j], du);
              axpy(1.0, dh, grad_h);
            }
          },
          [&](const ResponseHead& head) {
            const auto truth =
                static_cast<std::size_t>(std::get<ResponseRef>(label).index);
            Rng fixed = Rng(0).child("rs_negatives");
            Rng& r = rng ? *rng : fixed;
            std::vector<std::size_t> cands{truth};
            for (auto i : sample_negatives(head.pool.size(), truth,
                                           head.train_negatives, r)) {
              cands.push_back(i);
            }
            std::vector<Encoded> enc;
            std::vector<CosineGrad> cg;
            Vec logits(cands.size());
            for (std::size_t c = 0; c < cands.size(); ++c) {
              enc.push_back(
                  encode_with_cache(model.encoder, head.pool[cands[c]]));
              cg.push_back(cosine_with_grad(ctx.h, enc.back().h));
              logits[c] = model.similarity_scale * cg.back().value;
            }
            Vec p = softmax(logits);
            loss = cross_entropy(p, 0);
            if (!grads) return;
            p[0] -= 1.0;
            for (std::size_t c = 0; c < cands.size(); ++c) {
              const double ds = model.similarity_scale * p[c];
              axpy(ds, cg[c].du, grad_h);
              Vec dv = cg[c].dv;
              for (double& v : dv) v *= ds;
              backprop_encoded(model.encoder, enc[c], head.pool[cands[c]], dv,
                               grads->encoder);
            }
          }},
      model.head);

  if (grads) backprop_encoded(model.encoder, ctx, tokens, grad_h,
                              grads->encoder);
  return loss;
}

template <class Fn>
void for_each_param(TaskModel& model, const TaskModel* other, Fn&& fn) {
  auto apply = [&](std::span<double> p, std::span<const double> q) {
    fn(p, q);
  };
  auto other_enc = other ? &other->encoder : nullptr;
  apply(model.encoder.embeddings.flat(),
        other_enc ? other_enc->embeddings.flat() : std::span<const double>{});
  apply(model.encoder.weight.flat(),
        other_enc ? other_enc->weight.flat() : std::span<const double>{});
  apply(model.encoder.bias,
        other_enc ? std::span<const double>(other_enc->bias)
                  : std::span<const double>{});
  std::visit(
      Overloaded{
          [&](IntentHead& h) {
            apply(h.weight.flat(),
                  other ? std::get<IntentHead>(other->head).weight.flat()
                        : std::span<const double>{});
          },
          [&](DialogActHead& h) {
            apply(h.weight.flat(),
                  other ? std::get<DialogActHead>(other->head).weight.flat()
                        : std::span<const double>{});
          },
          [&](DialogStateHead& h) {
            for (std::size_t j = 0; j < h.projections.size(); ++j) {
              apply(h.projections[j].flat(),
                    other ? std::get<DialogStateHead>(other->head)
                                .projections[j]
                                .flat()
                          : std::span<const double>{});
            }
          },
          [&](ResponseHead&) {}},
      model.head);
}

}  // namespace

ModelBlueprint blueprint_from(const Dataset& dataset) {
  ModelBlueprint b;
  b.task = dataset.ontology.task;
  b.vocab_size = dataset.vocab.size();
  switch (b.task) {
    case TaskKind::kIntent:
      b.num_outputs = dataset.ontology.classes.size();
      break;
    case TaskKind::kDialogAct:
      b.num_outputs = dataset.ontology.da_intents.size();
      break;
    case TaskKind::kDialogState:
      b.slot_values = dataset.slot_value_tokens;
      break;
    case TaskKind::kResponseSelection:
      b.responses = dataset.response_tokens;
      break;
  }
  return b;
}

TaskModel init_model(const ModelBlueprint& blueprint, const ModelShape& shape,
                     std::uint64_t seed) {
  TaskModel m;
  m.task = blueprint.task;
  m.similarity_scale = shape.similarity_scale;
  m.encoder = init_encoder(seed, blueprint.vocab_size, shape.embed_dim,
                           shape.hidden_dim, shape.dropout_rate,
                           shape.embed_init_scale);
  Rng rng = Rng(seed).child("head");
  const std::size_t l = shape.hidden_dim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(l));
  switch (blueprint.task) {
    case TaskKind::kIntent:
      if (blueprint.num_outputs < 2) {
        throw InvalidInput("init_model: intent head needs >= 2 classes");
      }
      m.head = IntentHead{random_matrix(rng, blueprint.num_outputs, l, scale)};
      break;
    case TaskKind::kDialogAct:
      if (blueprint.num_outputs < 1) {
        throw InvalidInput("init_model: dialog-act head needs >= 1 intent");
      }
      m.head =
          DialogActHead{random_matrix(rng, blueprint.num_outputs, l, scale)};
      break;
    case TaskKind::kDialogState: {
      if (blueprint.slot_values.empty()) {
        throw InvalidInput("init_model: no slot pairs");
      }
      DialogStateHead h;
      for (std::size_t j = 0; j < blueprint.slot_values.size(); ++j) {
        h.projections.push_back(random_matrix(rng, l, l, scale));
      }
      h.values = blueprint.slot_values;
      m.head = std::move(h);
      break;
    }
    case TaskKind::kResponseSelection: {
      if (blueprint.responses.size() < 2) {
        throw InvalidInput("init_model: response pool too small");
      }
      ResponseHead h;
      h.pool = blueprint.responses;
      m.head = std::move(h);
      break;
    }
  }
  return m;
}

TaskModel zeros_like(const TaskModel& model) {
  TaskModel z = model;
  z.encoder = zeros_like(model.encoder);
  std::visit(Overloaded{[](IntentHead& h) { h.weight.set_zero(); },
                        [](DialogActHead& h) { h.weight.set_zero(); },
                        [](DialogStateHead& h) {
                          for (auto& g : h.projections) g.set_zero();
                        },
                        [](ResponseHead&) {}},
             z.head);
  return z;
}

Vec intent_forward(const IntentHead& head, std::span<const double> h) {
  return softmax(matvec(head.weight, h));
}

Vec da_forward(const DialogActHead& head, std::span<const double> h) {
  Vec z = matvec(head.weight, h);
  for (double& v : z) v = sigmoid(v);
  return z;
}

Vec encode_tokens(const TaskModel& model, std::span<const TokenId> tokens) {
  return encode(model.encoder, embed(model.encoder, tokens));
}

Vec dst_score(const TaskModel& model, std::span<const double> h,
              std::size_t pair) {
  const auto& head = std::get<DialogStateHead>(model.head);
  if (pair >= head.projections.size()) {
    throw InvalidInput("dst_score: pair " + std::to_string(pair) +
                       " out of range");
  }
  Vec u = matvec(head.projections[pair], h);
  Vec out;
  for (const auto& v : head.values[pair]) {
    out.push_back(cosine(u, encode_tokens(model, v)));
  }
  return out;
}

double rs_score(const TaskModel& model, std::span<const double> h_context,
                std::span<const TokenId> candidate) {
  if (candidate.empty()) throw InvalidInput("rs_score: empty candidate");
  return cosine(h_context, encode_tokens(model, candidate));
}

ModelView::ModelView(const TaskModel& model) : model_(&model) {
  if (const auto* dst = std::get_if<DialogStateHead>(&model.head)) {
    for (const auto& values : dst->values) {
      encoded_.emplace_back();
      for (const auto& v : values) {
        encoded_.back().push_back(encode_tokens(model, v));
      }
    }
  } else if (const auto* rs = std::get_if<ResponseHead>(&model.head)) {
    encoded_.emplace_back();
    for (const auto& c : rs->pool) {
      encoded_.back().push_back(encode_tokens(model, c));
    }
  }
}

Prediction ModelView::predict(std::span<const TokenId> tokens) const {
  const TaskModel& m = *model_;
  const Vec h = encode_tokens(m, tokens);
  Prediction pred;
  std::visit(
      Overloaded{
          [&](const IntentHead& head) {
            pred.scores = intent_forward(head, h);
            const auto best = argmax(pred.scores);
            pred.label = SingleClass{static_cast<int>(best)};
            pred.confidence = pred.scores[best];
          },
          [&](const DialogActHead& head) {
            pred.scores = da_forward(head, h);
            MultiLabel ml;
            ml.bits.assign(pred.scores.size(), 0);
            double pos = 0.0;
            double neg = 0.0;
            std::size_t n_pos = 0;
            for (std::size_t n = 0; n < pred.scores.size(); ++n) {
              neg += 1.0 - pred.scores[n];
              if (pred.scores[n] >= DialogActHead::kThreshold) {
                ml.bits[n] = 1;
                pos += pred.scores[n];
                ++n_pos;
              }
            }
            pred.confidence =
                n_pos ? pos / static_cast<double>(n_pos)
                      : neg / static_cast<double>(pred.scores.size());
            pred.label = std::move(ml);
          },
          [&](const DialogStateHead& head) {
            SlotAssignment sa;
            double total = 0.0;
            for (std::size_t j = 0; j < head.projections.size(); ++j) {
              Vec u = matvec(head.projections[j], h);
              Vec logits;
              for (const auto& v : encoded_[j]) {
                logits.push_back(m.similarity_scale * cosine(u, v));
              }
              Vec p = softmax(logits);
              const auto best = argmax(p);
              sa.values.push_back(static_cast<int>(best));
              pred.scores.push_back(p[best]);
              total += p[best];
            }
            pred.confidence = total / static_cast<double>(sa.values.size());
            pred.label = std::move(sa);
          },
          [&](const ResponseHead&) {
            Vec logits;
            for (const auto& c : encoded_[0]) {
              logits.push_back(m.similarity_scale * cosine(h, c));
            }
            pred.scores = softmax(logits);
            const auto best = argmax(pred.scores);
            pred.label = ResponseRef{static_cast<int>(best)};
            pred.confidence = pred.scores[best];
          }},
      m.head);
  return pred;
}

std::vector<int> ModelView::rank_candidates(
    std::span<const TokenId> tokens, std::span<const int> candidate_ids) const {
  if (!std::holds_alternative<ResponseHead>(model_->head)) {
    throw InvalidInput("rank_candidates: not a response selection model");
  }
  const Vec h = encode_tokens(*model_, tokens);
  std::vector<std::pair<double, int>> scored;
  for (int id : candidate_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= encoded_[0].size()) {
      throw InvalidInput("rank_candidates: candidate id out of range");
    }
    scored.emplace_back(cosine(h, encoded_[0][id]), id);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a,
                                                    const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<int> out;
  for (const auto& s : scored) out.push_back(s.second);
  return out;
}

double ModelView::score_and_grad(const Mat& x, const LabelValue& y,
                                 Mat* grad) const {
  const TaskModel& m = *model_;
  EncoderCache cache;
  const Vec h = encode(m.encoder, x, nullptr, &cache);
  const std::size_t l = m.encoder.hidden_dim();
  Vec grad_h(l, 0.0);
  double score = 0.0;

  std::visit(
      Overloaded{
          [&](const IntentHead& head) {
            const auto c = static_cast<std::size_t>(
                std::get<SingleClass>(y).index);
            Vec p = intent_forward(head, h);
            if (c >= p.size()) throw InvalidInput("label out of range");
            score = p[c];
            // dp_c/dz = p_c (e_c - p)
            Vec dz(p.size());
            for (std::size_t k = 0; k < p.size(); ++k) {
              dz[k] = score * ((k == c ? 1.0 : 0.0) - p[k]);
            }
            grad_h = matvec_transposed(head.weight, dz);
          },
          [&](const DialogActHead& head) {
            const auto& bits = std::get<MultiLabel>(y).bits;
            Vec a = da_forward(head, h);
            if (bits.size() != a.size()) {
              throw InvalidInput("dialog-act label width mismatch");
            }
            const auto n_pos = static_cast<std::size_t>(
                std::count(bits.begin(), bits.end(), 1));
            Vec dz(a.size(), 0.0);
            if (n_pos > 0) {
              for (std::size_t n = 0; n < a.size(); ++n) {
                if (!bits[n]) continue;
                score += a[n];
                dz[n] = a[n] * (1.0 - a[n]) / static_cast<double>(n_pos);
              }
              score /= static_cast<double>(n_pos);
            } else {
              const auto count = static_cast<double>(a.size());
              for (std::size_t n = 0; n < a.size(); ++n) {
                score += 1.0 - a[n];
                dz[n] = -a[n] * (1.0 - a[n]) / count;
              }
              score /= count;
            }
            grad_h = matvec_transposed(head.weight, dz);
          },
          [&](const DialogStateHead& head) {
            const auto& values = std::get<SlotAssignment>(y).values;
            if (values.size() != head.projections.size()) {
              throw InvalidInput("slot assignment width mismatch");
            }
            const double inv_pairs =
                1.0 / static_cast<double>(head.projections.size());
            for (std::size_t j = 0; j < head.projections.size(); ++j) {
              Vec u = matvec(head.projections[j], h);
              std::vector<CosineGrad> cg;
              Vec logits;
              for (const auto& v : encoded_[j]) {
                cg.push_back(cosine_with_grad(u, v));
                logits.push_back(m.similarity_scale * cg.back().value);
              }
              Vec p = softmax(logits);
              const auto t = static_cast<std::size_t>(values[j]);
              if (t >= p.size()) throw InvalidInput("slot value out of range");
              score += inv_pairs * p[t];
              Vec du(l, 0.0);
              for (std::size_t i = 0; i < p.size(); ++i) {
                const double ds = inv_pairs * m.similarity_scale * p[t] *
                                  ((i == t ? 1.0 : 0.0) - p[i]);
                axpy(ds, cg[i].du, du);
              }
              axpy(1.0, matvec_transposed(head.projections[j], du), grad_h);
            }
          },
          [&](const ResponseHead&) {
            const auto t =
                static_cast<std::size_t>(std::get<ResponseRef>(y).index);
            const auto& pool = encoded_[0];
            if (t >= pool.size()) throw InvalidInput("response out of range");
            std::vector<CosineGrad> cg;
            Vec logits;
            for (const auto& c : pool) {
              cg.push_back(cosine_with_grad(h, c));
              logits.push_back(m.similarity_scale * cg.back().value);
            }
            Vec p = softmax(logits);
            score = p[t];
            for (std::size_t i = 0; i < p.size(); ++i) {
              const double ds =
                  m.similarity_scale * p[t] * ((i == t ? 1.0 : 0.0) - p[i]);
              axpy(ds, cg[i].du, grad_h);
            }
          }},
      m.head);

  if (grad) *grad = encode_backward(m.encoder, x, cache, grad_h, nullptr);
  return score;
}

double ModelView::scalar_score_for_label(const Mat& x,
                                         const LabelValue& y) const {
  return score_and_grad(x, y, nullptr);
}

Mat ModelView::grad_wrt_token_embeddings(const Mat& x,
                                         const LabelValue& y) const {
  Mat g;
  score_and_grad(x, y, &g);
  if (!all_finite(g.flat())) {
    throw InvalidInput("grad_wrt_token_embeddings: non-finite gradient");
  }
  return g;
}

Prediction predict(const TaskModel& model, std::span<const TokenId> tokens) {
  return ModelView(model).predict(tokens);
}

double scalar_score_for_label(const TaskModel& model, const Mat& x,
                              const LabelValue& y) {
  return ModelView(model).scalar_score_for_label(x, y);
}

Mat grad_wrt_token_embeddings(const TaskModel& model, const Mat& x,
                              const LabelValue& y) {
  return ModelView(model).grad_wrt_token_embeddings(x, y);
}

double example_loss(const TaskModel& model, std::span<const TokenId> tokens,
                    const LabelValue& label, Rng* rng, TaskModel* grads) {
  if (model.task == TaskKind::kDialogState) {
    ValueBank bank = build_value_bank(model);
    const double loss = loss_impl(model, tokens, label, rng, grads, &bank);
    if (grads) flush_value_bank(model, bank, grads->encoder);
    return loss;
  }
  return loss_impl(model, tokens, label, rng, grads, nullptr);
}

double train_step(TaskModel& model, std::span<const Example* const> batch,
                  double learning_rate, Rng& rng) {
  if (!(learning_rate >= 0.0)) {
    throw InvalidInput("train_step: negative learning rate");
  }
  if (batch.empty()) return 0.0;
  bool finite_params = true;
  for_each_param(model, nullptr, [&](std::span<double> p, auto) {
    finite_params = finite_params && all_finite(p);
  });
  if (!finite_params) {
    throw TrainingDiverged("train_step: model has non-finite parameters");
  }
  TaskModel grads = zeros_like(model);
  ValueBank bank;
  const bool dst = model.task == TaskKind::kDialogState;
  if (dst) bank = build_value_bank(model);
  double total = 0.0;
  for (const Example* ex : batch) {
    if (!ex->label) throw InvalidInput("train_step: unlabeled example " + ex->id);
    total += loss_impl(model, ex->tokens, *ex->label, &rng, &grads,
                       dst ? &bank : nullptr);
  }
  if (dst) flush_value_bank(model, bank, grads.encoder);
  const double loss = total / static_cast<double>(batch.size());
  bool finite = std::isfinite(loss);
  for_each_param(grads, nullptr, [&](std::span<double> g, auto) {
    finite = finite && all_finite(g);
  });
  if (!finite) {
    throw TrainingDiverged("train_step: non-finite loss or gradient (loss=" +
                           std::to_string(loss) + ", batch of " +
                           std::to_string(batch.size()) + ", first id " +
                           batch.front()->id + ")");
  }
  if (learning_rate == 0.0) return loss;
  const double step = learning_rate / static_cast<double>(batch.size());
  for_each_param(model, &grads, [&](std::span<double> p,
                                    std::span<const double> g) {
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= step * g[i];
  });
  return loss;
}

}  // namespace gradst
