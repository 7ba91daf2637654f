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

// Shallow differentiable feature extractor. Each token embedding row X_i is
// passed through tanh(W x + b) and the results are mean-pooled into the
// hidden representation h. Pooling after the nonlinearity keeps the encoder
// order-invariant while letting per-token gradients differ, which the
// saliency computations depend on.

#ifndef GRADST_ENCODER_H_
#define GRADST_ENCODER_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gradst/corpus.h"
#include "gradst/numeric.h"

namespace gradst {

struct EncoderParams {
  Mat embeddings;  // V x d
  Mat weight;      // l x d
  Vec bias;        // l
  double dropout_rate = 0.1;

  std::size_t vocab_size() const { return embeddings.rows(); }
  std::size_t embed_dim() const { return embeddings.cols(); }
  std::size_t hidden_dim() const { return weight.rows(); }

  bool operator==(const EncoderParams&) const = default;
};

EncoderParams init_encoder(std::uint64_t seed, std::size_t vocab_size,
                           std::size_t embed_dim, std::size_t hidden_dim,
                           double dropout_rate = 0.1,
                           double embed_scale = 0.1);

// Copies the embedding rows of tokens into an n x d matrix. Throws
// InvalidInput on an id outside the table.
Mat embed(const EncoderParams& params, std::span<const TokenId> tokens);

// Per-token activations kept for the backward pass.
struct EncoderCache {
  Mat activations;   // n x l, tanh(W X_i + b)
  Vec dropout_scale;  // empty when no mask was applied
};

using DropoutMask = std::vector<std::uint8_t>;

// h = mean_i tanh(W X_i + b), then inverted dropout when a mask is given.
Vec encode(const EncoderParams& params, const Mat& x,
           const DropoutMask* dropout_mask = nullptr,
           EncoderCache* cache = nullptr);

// Draws a keep-mask of length hidden_dim for the configured dropout rate.
DropoutMask sample_dropout_mask(const EncoderParams& params, Rng& rng);

// Backpropagates dL/dh. Returns dL/dX; when grads is non-null, accumulates
// weight and bias gradients into it (its embeddings are left untouched; use
// scatter_embedding_grad for those).
Mat encode_backward(const EncoderParams& params, const Mat& x,
                    const EncoderCache& cache, std::span<const double> grad_h,
                    EncoderParams* grads);

void scatter_embedding_grad(const Mat& grad_x, std::span<const TokenId> tokens,
                            Mat& grad_embeddings);

// Same-shaped zero parameters, used as a gradient accumulator.
EncoderParams zeros_like(const EncoderParams& params);

}  // namespace gradst

#endif  // GRADST_ENCODER_H_
