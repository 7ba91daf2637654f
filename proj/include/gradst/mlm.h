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

// Window-based masked-token model: a masked position is predicted from the
// mean embedding of the unmasked tokens within `window` positions of it.
// Trained once on all training text and frozen afterwards.

#ifndef GRADST_MLM_H_
#define GRADST_MLM_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gradst/corpus.h"
#include "gradst/numeric.h"

namespace gradst {

struct MlmModel {
  Mat embeddings;  // V x d_m
  Mat output;      // V x d_m
  Vec bias;        // V
  std::size_t window = 3;

  std::size_t vocab_size() const { return embeddings.rows(); }

  bool operator==(const MlmModel&) const = default;
};

struct MlmTrainOptions {
  double mask_ratio = 0.15;
  std::size_t epochs = 10;
  std::size_t dim = 32;
  std::size_t window = 3;
  double learning_rate = 0.1;
  double heldout_fraction = 0.1;
  std::uint64_t seed = 0;
};

struct MlmTrainReport {
  // Mean held-out cross-entropy; entry 0 is before the first epoch.
  std::vector<double> heldout_loss;
  std::size_t train_sequences = 0;
  std::size_t heldout_sequences = 0;
};

MlmModel init_mlm(std::size_t vocab_size, std::size_t dim, std::size_t window,
                  std::uint64_t seed);

// SGD on the cross-entropy of each masked token. Sequences are split into
// a training part and a held-out slice (heldout_fraction, at least one
// sequence when the corpus has two or more).
MlmModel mlm_train(std::span<const Tokens> corpus, std::size_t vocab_size,
                   const MlmTrainOptions& options,
                   MlmTrainReport* report = nullptr);

// Mean cross-entropy of predicting every non-reserved token of every
// sequence with only that token masked.
double mlm_heldout_loss(const MlmModel& model,
                        std::span<const Tokens> sequences);

// One distribution over the vocabulary per masked position. Every position
// must hold [MASK]; reserved tokens get probability zero.
std::vector<Vec> mlm_predict(const MlmModel& model,
                             std::span<const TokenId> tokens,
                             std::span<const std::size_t> positions);

// Replaces each masked position with a token drawn from its top-k
// predictions, proportionally to their probabilities renormalised over the
// top k. k larger than the number of predictable tokens is clipped.
Tokens mlm_sample_reconstruction(const MlmModel& model,
                                 std::span<const TokenId> tokens,
                                 std::span<const std::size_t> positions,
                                 std::size_t k, Rng& rng);

// The top-k (token, renormalised probability) pairs for one distribution,
// ordered by descending probability with ties to the lower id.
std::vector<std::pair<TokenId, double>> top_k_renormalized(
    std::span<const double> distribution, std::size_t k);

}  // namespace gradst

#endif  // GRADST_MLM_H_
