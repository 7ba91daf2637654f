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

// Task-specific output networks on top of the shared encoder, plus the
// predict-with-confidence interface consumed by self-training.

#ifndef GRADST_HEADS_H_
#define GRADST_HEADS_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "gradst/corpus.h"
#include "gradst/encoder.h"
#include "gradst/numeric.h"

namespace gradst {

// softmax(W h) over I intents.
struct IntentHead {
  Mat weight;  // I x l
  bool operator==(const IntentHead&) const = default;
};

// sigmoid(W h) per dialog-act intent; positive when >= kThreshold.
struct DialogActHead {
  static constexpr double kThreshold = 0.5;
  Mat weight;  // N x l
  bool operator==(const DialogActHead&) const = default;
};

// One l x l projection per (domain, slot) pair; values are scored by the
// cosine between G_j h and the encoding of the value's tokens.
struct DialogStateHead {
  std::vector<Mat> projections;
  std::vector<std::vector<Tokens>> values;
  bool operator==(const DialogStateHead&) const = default;
};

// Dual encoder: cosine between the context encoding and a candidate
// encoding, both from the shared encoder.
struct ResponseHead {
  std::vector<Tokens> pool;
  std::size_t train_negatives = 20;
  std::size_t eval_negatives = 100;
  bool operator==(const ResponseHead&) const = default;
};

using Head = std::variant<IntentHead, DialogActHead, DialogStateHead,
                          ResponseHead>;

struct TaskModel {
  TaskKind task = TaskKind::kIntent;
  EncoderParams encoder;
  Head head;
  // Multiplier applied to cosine scores before a softmax (DST and RS).
  double similarity_scale = 1.0;

  bool operator==(const TaskModel&) const = default;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Everything init_model needs to size a head.
struct ModelBlueprint {
  TaskKind task = TaskKind::kIntent;
  std::size_t vocab_size = 0;
  // Intent classes or dialog-act intents.
  std::size_t num_outputs = 0;
  std::vector<std::vector<Tokens>> slot_values;
  std::vector<Tokens> responses;
};

ModelBlueprint blueprint_from(const Dataset& dataset);

struct ModelShape {
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 32;
  double dropout_rate = 0.1;
  double similarity_scale = 1.0;
  // Standard deviation of the initial token embeddings.
  double embed_init_scale = 0.1;
};

TaskModel init_model(const ModelBlueprint& blueprint, const ModelShape& shape,
                     std::uint64_t seed);

// Gradient accumulator with the same layout as model.
TaskModel zeros_like(const TaskModel& model);

Vec intent_forward(const IntentHead& head, std::span<const double> h);
Vec da_forward(const DialogActHead& head, std::span<const double> h);
// Cosine of G_j h against every value of pair j.
Vec dst_score(const TaskModel& model, std::span<const double> h,
              std::size_t pair);
double rs_score(const TaskModel& model, std::span<const double> h_context,
                std::span<const TokenId> candidate);

// Deterministic (dropout-free) encoding of a token sequence.
Vec encode_tokens(const TaskModel& model, std::span<const TokenId> tokens);

struct Prediction {
  LabelValue label;
  double confidence = 0.0;
  // Per-dimension scores: class probabilities, act probabilities, winning
  // value probability per pair, or candidate probabilities.
  Vec scores;
};

// Read-only view of a trained model with the encodings of slot values or
// pool candidates precomputed. Safe to share across threads.
class ModelView {
 public:
  explicit ModelView(const TaskModel& model);

  const TaskModel& model() const { return *model_; }

  // For response selection the label ranks the whole candidate pool.
  Prediction predict(std::span<const TokenId> tokens) const;

  // Candidate ids ordered by descending score (ties by lower id).
  std::vector<int> rank_candidates(std::span<const TokenId> tokens,
                                   std::span<const int> candidate_ids) const;

  // The prediction score F_y(X) of label y for an input given by its
  // embedding matrix.
  double scalar_score_for_label(const Mat& x, const LabelValue& y) const;

  // Exact dF_y/dX (n x d).
  Mat grad_wrt_token_embeddings(const Mat& x, const LabelValue& y) const;

 private:
  double score_and_grad(const Mat& x, const LabelValue& y, Mat* grad) const;

  const TaskModel* model_;
  // [pair][value] for DST, [0][candidate] for RS.
  std::vector<std::vector<Vec>> encoded_;
};

Prediction predict(const TaskModel& model, std::span<const TokenId> tokens);
double scalar_score_for_label(const TaskModel& model, const Mat& x,
                              const LabelValue& y);
Mat grad_wrt_token_embeddings(const TaskModel& model, const Mat& x,
                              const LabelValue& y);

// Training loss of one example. Uses rng for the dropout mask and, for
// response selection, the sampled negatives; pass nullptr to disable
// dropout (negatives are then drawn from a fixed stream). Accumulates
// parameter gradients into grads when non-null.
double example_loss(const TaskModel& model, std::span<const TokenId> tokens,
                    const LabelValue& label, Rng* rng, TaskModel* grads);

// Plain SGD on the mean loss of a batch. Throws TrainingDiverged without
// touching the parameters when the loss or a gradient is non-finite.
double train_step(TaskModel& model, std::span<const Example* const> batch,
                  double learning_rate, Rng& rng);

}  // namespace gradst

#endif  // GRADST_HEADS_H_
