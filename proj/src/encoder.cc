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

#include "gradst/encoder.h"

#include <cmath>
#include <string>

namespace gradst {

EncoderParams init_encoder(std::uint64_t seed, std::size_t vocab_size,
                           std::size_t embed_dim, std::size_t hidden_dim,
                           double dropout_rate, double embed_scale) {
  if (!(embed_scale > 0.0)) {
    throw InvalidInput("init_encoder: embedding scale must be positive");
  }
  if (embed_dim == 0 || hidden_dim == 0) {
    throw InvalidInput("init_encoder: dimensions must be positive");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw InvalidInput("init_encoder: dropout rate outside [0, 1)");
  }
  Rng rng = Rng(seed).child("encoder");
  EncoderParams p;
  p.embeddings = Mat(vocab_size, embed_dim);
  for (double& v : p.embeddings.flat()) v = embed_scale * rng.normal();
  p.weight = Mat(hidden_dim, embed_dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(embed_dim));
  for (double& v : p.weight.flat()) v = scale * rng.normal();
  p.bias.assign(hidden_dim, 0.0);
  p.dropout_rate = dropout_rate;
  return p;
}

Mat embed(const EncoderParams& params, std::span<const TokenId> tokens) {
  const std::size_t d = params.embed_dim();
  Mat x(tokens.size(), d);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const TokenId t = tokens[i];
    if (t < 0 || static_cast<std::size_t>(t) >= params.vocab_size()) {
      throw InvalidInput("embed: token id " + std::to_string(t) +
                         " outside vocabulary");
    }
    auto src = params.embeddings.row(t);
    std::copy(src.begin(), src.end(), x.row(i).begin());
  }
  return x;
}

Vec encode(const EncoderParams& params, const Mat& x,
           const DropoutMask* dropout_mask, EncoderCache* cache) {
  if (x.rows() == 0) throw InvalidInput("encode: empty input");
  if (x.cols() != params.embed_dim()) {
    throw InvalidInput("encode: embedding width mismatch");
  }
  const std::size_t n = x.rows();
  const std::size_t l = params.hidden_dim();
  Mat act(n, l);
  Vec h(l, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    Vec pre = matvec(params.weight, x.row(i));
    auto row = act.row(i);
    for (std::size_t k = 0; k < l; ++k) {
      row[k] = std::tanh(pre[k] + params.bias[k]);
      h[k] += row[k];
    }
  }
  for (double& v : h) v /= static_cast<double>(n);
  Vec scale;
  if (dropout_mask) {
    if (dropout_mask->size() != l) {
      throw InvalidInput("encode: dropout mask length mismatch");
    }
    scale.resize(l);
    const double keep = 1.0 - params.dropout_rate;
    for (std::size_t k = 0; k < l; ++k) {
      scale[k] = (*dropout_mask)[k] ? 1.0 / keep : 0.0;
      h[k] *= scale[k];
    }
  }
  if (cache) {
    cache->activations = std::move(act);
    cache->dropout_scale = std::move(scale);
  }
  return h;
}

DropoutMask sample_dropout_mask(const EncoderParams& params, Rng& rng) {
  DropoutMask mask(params.hidden_dim(), 1);
  if (params.dropout_rate <= 0.0) return mask;
  for (auto& m : mask) m = rng.uniform() >= params.dropout_rate ? 1 : 0;
  return mask;
}

Mat encode_backward(const EncoderParams& params, const Mat& x,
                    const EncoderCache& cache, std::span<const double> grad_h,
                    EncoderParams* grads) {
  const std::size_t n = x.rows();
  const std::size_t l = params.hidden_dim();
  if (grad_h.size() != l) throw InvalidInput("encode_backward: grad length");
  Vec g(grad_h.begin(), grad_h.end());
  if (!cache.dropout_scale.empty()) {
    for (std::size_t k = 0; k < l; ++k) g[k] *= cache.dropout_scale[k];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  Mat grad_x(n, params.embed_dim());
  Vec dpre(l);
  for (std::size_t i = 0; i < n; ++i) {
    auto a = cache.activations.row(i);
    for (std::size_t k = 0; k < l; ++k) {
      dpre[k] = g[k] * inv_n * (1.0 - a[k] * a[k]);
    }
    Vec dx = matvec_transposed(params.weight, dpre);
    std::copy(dx.begin(), dx.end(), grad_x.row(i).begin());
    if (grads) {
      add_outer(grads->weight, dpre, x.row(i));
      axpy(1.0, dpre, grads->bias);
    }
  }
  return grad_x;
}

void scatter_embedding_grad(const Mat& grad_x, std::span<const TokenId> tokens,
                            Mat& grad_embeddings) {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    axpy(1.0, grad_x.row(i), grad_embeddings.row(tokens[i]));
  }
}

EncoderParams zeros_like(const EncoderParams& params) {
  EncoderParams z;
  z.embeddings = Mat(params.embeddings.rows(), params.embeddings.cols());
  z.weight = Mat(params.weight.rows(), params.weight.cols());
  z.bias.assign(params.bias.size(), 0.0);
  z.dropout_rate = params.dropout_rate;
  return z;
}

}  // namespace gradst
