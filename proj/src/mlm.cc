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

#include "gradst/mlm.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <string>

namespace gradst {

namespace {

// Mean embedding of the context of `pos`, skipping [MASK], [PAD] and the
// position itself. Returns the contributing positions through `used`.
Vec context_vector(const MlmModel& m, std::span<const TokenId> tokens,
                   std::size_t pos, std::vector<std::size_t>* used) {
  const std::size_t lo = pos >= m.window ? pos - m.window : 0;
  const std::size_t hi = std::min(tokens.size() - 1, pos + m.window);
  Vec ctx(m.embeddings.cols(), 0.0);
  std::size_t count = 0;
  for (std::size_t i = lo; i <= hi; ++i) {
    if (i == pos) continue;
    const TokenId t = tokens[i];
    if (t == Vocab::kMask || t == Vocab::kPad) continue;
    axpy(1.0, m.embeddings.row(t), ctx);
    ++count;
    if (used) used->push_back(i);
  }
  if (count) {
    for (double& v : ctx) v /= static_cast<double>(count);
  }
  return ctx;
}

Vec logits_for(const MlmModel& m, std::span<const double> ctx) {
  Vec z = matvec(m.output, ctx);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] += m.bias[i];
  return z;
}

Vec predictable_softmax(Vec logits) {
  for (TokenId r = 0; r < Vocab::kNumReserved &&
                      static_cast<std::size_t>(r) < logits.size();
       ++r) {
    logits[r] = -std::numeric_limits<double>::infinity();
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& v : logits) {
    v = std::isinf(v) ? 0.0 : std::exp(v - top);
    total += v;
  }
  for (double& v : logits) v /= total;
  return logits;
}

void check_tokens(const MlmModel& m, std::span<const TokenId> tokens) {
  for (TokenId t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= m.vocab_size()) {
      throw InvalidInput("mlm: token id " + std::to_string(t) +
                         " outside vocabulary");
    }
  }
}

// One SGD step on predicting tokens[pos] (original) given masked input.
double sgd_position(MlmModel& m, std::span<const TokenId> masked,
                    std::size_t pos, TokenId target, double lr) {
  std::vector<std::size_t> used;
  Vec ctx = context_vector(m, masked, pos, &used);
  Vec p = predictable_softmax(logits_for(m, ctx));
  const double loss = cross_entropy(p, static_cast<std::size_t>(target));
  p[target] -= 1.0;
  Vec dctx = matvec_transposed(m.output, p);
  add_outer(m.output, p, ctx, -lr);
  axpy(-lr, p, m.bias);
  if (!used.empty()) {
    const double share = -lr / static_cast<double>(used.size());
    for (std::size_t i : used) axpy(share, dctx, m.embeddings.row(masked[i]));
  }
  return loss;
}

}  // namespace

MlmModel init_mlm(std::size_t vocab_size, std::size_t dim, std::size_t window,
                  std::uint64_t seed) {
  if (vocab_size <= static_cast<std::size_t>(Vocab::kNumReserved)) {
    throw InvalidInput("mlm: empty vocabulary");
  }
  if (dim == 0 || window == 0) throw InvalidInput("mlm: zero dim or window");
  Rng rng = Rng(seed).child("mlm_init");
  MlmModel m;
  m.window = window;
  m.embeddings = Mat(vocab_size, dim);
  m.output = Mat(vocab_size, dim);
  m.bias.assign(vocab_size, 0.0);
  const double scale = 0.1;
  for (double& v : m.embeddings.flat()) v = scale * rng.normal();
  for (double& v : m.output.flat()) v = scale * rng.normal();
  return m;
}

MlmModel mlm_train(std::span<const Tokens> corpus, std::size_t vocab_size,
                   const MlmTrainOptions& options, MlmTrainReport* report) {
  if (corpus.empty()) throw InvalidInput("mlm_train: empty corpus");
  if (!(options.mask_ratio > 0.0 && options.mask_ratio < 1.0)) {
    throw InvalidInput("mlm_train: mask ratio outside (0, 1)");
  }
  MlmModel m = init_mlm(vocab_size, options.dim, options.window, options.seed);
  for (const auto& seq : corpus) check_tokens(m, seq);

  Rng rng = Rng(options.seed).child("mlm_train");
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  std::size_t n_held = static_cast<std::size_t>(
      std::floor(options.heldout_fraction * static_cast<double>(corpus.size())));
  if (corpus.size() >= 2) n_held = std::max<std::size_t>(n_held, 1);
  std::vector<Tokens> heldout;
  for (std::size_t i = 0; i < n_held; ++i) heldout.push_back(corpus[order[i]]);
  std::vector<std::size_t> train(order.begin() + n_held, order.end());

  MlmTrainReport rep;
  rep.train_sequences = train.size();
  rep.heldout_sequences = heldout.size();
  if (!heldout.empty()) rep.heldout_loss.push_back(mlm_heldout_loss(m, heldout));

  Tokens masked;
  std::vector<std::size_t> candidates;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    for (std::size_t i = train.size(); i > 1; --i) {
      std::swap(train[i - 1], train[rng.below(i)]);
    }
    for (std::size_t idx : train) {
      const Tokens& seq = corpus[idx];
      candidates.clear();
      for (std::size_t i = 0; i < seq.size(); ++i) {
        if (!Vocab::is_reserved(seq[i])) candidates.push_back(i);
      }
      if (candidates.empty()) continue;
      const std::size_t k = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::floor(
                 options.mask_ratio * static_cast<double>(candidates.size()) +
                 0.5)));
      for (std::size_t i = 0; i < k; ++i) {
        std::swap(candidates[i],
                  candidates[i + rng.below(candidates.size() - i)]);
      }
      masked = seq;
      for (std::size_t i = 0; i < k; ++i) masked[candidates[i]] = Vocab::kMask;
      for (std::size_t i = 0; i < k; ++i) {
        sgd_position(m, masked, candidates[i], seq[candidates[i]],
                     options.learning_rate);
      }
    }
    if (!heldout.empty()) {
      rep.heldout_loss.push_back(mlm_heldout_loss(m, heldout));
    }
  }
  if (report) *report = std::move(rep);
  return m;
}

double mlm_heldout_loss(const MlmModel& model,
                        std::span<const Tokens> sequences) {
  double total = 0.0;
  std::size_t count = 0;
  Tokens masked;
  for (const auto& seq : sequences) {
    masked = seq;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (Vocab::is_reserved(seq[i])) continue;
      masked[i] = Vocab::kMask;
      Vec p = predictable_softmax(
          logits_for(model, context_vector(model, masked, i, nullptr)));
      total += cross_entropy(p, static_cast<std::size_t>(seq[i]));
      ++count;
      masked[i] = seq[i];
    }
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

std::vector<Vec> mlm_predict(const MlmModel& model,
                             std::span<const TokenId> tokens,
                             std::span<const std::size_t> positions) {
  if (positions.empty()) throw InvalidInput("mlm_predict: no masked positions");
  check_tokens(model, tokens);
  std::vector<Vec> out;
  for (std::size_t pos : positions) {
    if (pos >= tokens.size() || tokens[pos] != Vocab::kMask) {
      throw InvalidInput("mlm_predict: position " + std::to_string(pos) +
                         " is not [MASK]");
    }
    out.push_back(predictable_softmax(
        logits_for(model, context_vector(model, tokens, pos, nullptr))));
  }
  return out;
}

std::vector<std::pair<TokenId, double>> top_k_renormalized(
    std::span<const double> distribution, std::size_t k) {
  const std::size_t predictable =
      distribution.size() > static_cast<std::size_t>(Vocab::kNumReserved)
          ? distribution.size() - Vocab::kNumReserved
          : 0;
  if (predictable == 0) throw InvalidInput("top_k: nothing predictable");
  if (k > predictable) {
    static std::atomic<bool> warned{false};
    if (!warned.exchange(true)) {
      std::cerr << "warning: top-k of " << k << " clipped to " << predictable
                << " predictable tokens\n";
    }
    k = predictable;
  }
  if (k == 0) throw InvalidInput("top_k: k must be positive");
  std::vector<TokenId> ids;
  for (std::size_t i = Vocab::kNumReserved; i < distribution.size(); ++i) {
    ids.push_back(static_cast<TokenId>(i));
  }
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k),
                    ids.end(), [&](TokenId a, TokenId b) {
                      if (distribution[a] != distribution[b]) {
                        return distribution[a] > distribution[b];
                      }
                      return a < b;
                    });
  std::vector<std::pair<TokenId, double>> out;
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) total += distribution[ids[i]];
  for (std::size_t i = 0; i < k; ++i) {
    out.emplace_back(ids[i], total > 0.0 ? distribution[ids[i]] / total
                                         : 1.0 / static_cast<double>(k));
  }
  return out;
}

Tokens mlm_sample_reconstruction(const MlmModel& model,
                                 std::span<const TokenId> tokens,
                                 std::span<const std::size_t> positions,
                                 std::size_t k, Rng& rng) {
  const auto dists = mlm_predict(model, tokens, positions);
  Tokens out(tokens.begin(), tokens.end());
  for (std::size_t j = 0; j < positions.size(); ++j) {
    const auto top = top_k_renormalized(dists[j], k);
    double u = rng.uniform();
    TokenId pick = top.back().first;
    for (const auto& [id, prob] : top) {
      if (u < prob) {
        pick = id;
        break;
      }
      u -= prob;
    }
    out[positions[j]] = pick;
  }
  return out;
}

}  // namespace gradst
