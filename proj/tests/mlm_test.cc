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

#include <cmath>
#include <map>
#include <vector>

#include "gradst/rng.h"
#include "gtest/gtest.h"

namespace gradst {
namespace {

constexpr TokenId kFirst = Vocab::kNumReserved;
constexpr int kSide = 5;

// Triples [a, t, c] with a and c from disjoint sets of kSide tokens and
// t = a * kSide + c drawn from a third set, so the middle token is fixed by
// its two neighbours.
TokenId left_tok(int a) { return kFirst + a; }
TokenId right_tok(int c) { return kFirst + kSide + c; }
TokenId mid_tok(int a, int c) { return kFirst + 2 * kSide + a * kSide + c; }
constexpr std::size_t kVocab = kFirst + 2 * kSide + kSide * kSide;

std::vector<Tokens> triple_corpus(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Tokens> out;
  for (std::size_t i = 0; i < n; ++i) {
    const int a = static_cast<int>(rng.below(kSide));
    const int c = static_cast<int>(rng.below(kSide));
    out.push_back({left_tok(a), mid_tok(a, c), right_tok(c)});
  }
  return out;
}

MlmModel trained_triple_model() {
  MlmTrainOptions o;
  o.epochs = 40;
  o.learning_rate = 0.2;
  o.seed = 3;
  return mlm_train(triple_corpus(2000, 1), kVocab, o);
}

TEST(MlmTest, RecoversGeneratingRule) {
  const MlmModel m = trained_triple_model();
  const auto heldout = triple_corpus(500, 99);
  std::size_t hits = 0;
  for (const auto& seq : heldout) {
    Tokens masked = seq;
    masked[1] = Vocab::kMask;
    const std::vector<std::size_t> pos = {1};
    const Vec p = mlm_predict(m, masked, pos)[0];
    const auto best = top_k_renormalized(p, 1);
    hits += best[0].first == seq[1];
  }
  EXPECT_GE(static_cast<double>(hits) / heldout.size(), 0.9);
}

TEST(MlmTest, HeldoutLossDecreases) {
  MlmTrainOptions o;
  o.epochs = 5;
  o.seed = 2;
  MlmTrainReport rep;
  mlm_train(triple_corpus(500, 5), kVocab, o, &rep);
  ASSERT_EQ(rep.heldout_loss.size(), 6u);
  EXPECT_LT(rep.heldout_loss.back(), rep.heldout_loss.front());
  EXPECT_EQ(rep.heldout_sequences, 50u);
  EXPECT_EQ(rep.train_sequences, 450u);
}

TEST(MlmTest, ZeroEpochsIsInitialization) {
  MlmTrainOptions o;
  o.epochs = 0;
  o.seed = 8;
  const MlmModel m = mlm_train(triple_corpus(20, 1), kVocab, o);
  EXPECT_EQ(m, init_mlm(kVocab, o.dim, o.window, o.seed));
}

TEST(MlmTest, SameSeedSameModel) {
  MlmTrainOptions o;
  o.epochs = 2;
  o.seed = 4;
  const auto corpus = triple_corpus(100, 1);
  EXPECT_EQ(mlm_train(corpus, kVocab, o), mlm_train(corpus, kVocab, o));
}

TEST(MlmTest, TrainErrors) {
  MlmTrainOptions o;
  EXPECT_THROW(mlm_train({}, kVocab, o), InvalidInput);
  EXPECT_THROW(mlm_train(triple_corpus(5, 1), Vocab::kNumReserved, o),
               InvalidInput);
  o.mask_ratio = 0.0;
  EXPECT_THROW(mlm_train(triple_corpus(5, 1), kVocab, o), InvalidInput);
}

TEST(MlmTest, PredictDistributions) {
  const MlmModel m = init_mlm(kVocab, 8, 3, 1);
  const Tokens t = {left_tok(0), Vocab::kMask, right_tok(1), Vocab::kMask};
  const std::vector<std::size_t> pos = {1, 3};
  const auto dists = mlm_predict(m, t, pos);
  ASSERT_EQ(dists.size(), 2u);
  for (const auto& p : dists) {
    ASSERT_EQ(p.size(), kVocab);
    double total = 0.0;
    for (double v : p) total += v;
    EXPECT_NEAR(total, 1.0, 1e-12);
    for (TokenId r = 0; r < Vocab::kNumReserved; ++r) EXPECT_EQ(p[r], 0.0);
  }
}

TEST(MlmTest, PredictErrors) {
  const MlmModel m = init_mlm(kVocab, 8, 3, 1);
  const Tokens t = {left_tok(0), Vocab::kMask};
  EXPECT_THROW(mlm_predict(m, t, {}), InvalidInput);
  const std::vector<std::size_t> unmasked = {0};
  EXPECT_THROW(mlm_predict(m, t, unmasked), InvalidInput);
  const std::vector<std::size_t> outside = {5};
  EXPECT_THROW(mlm_predict(m, t, outside), InvalidInput);
}

TEST(MlmTest, TopKRenormalizes) {
  const Vec p = {0, 0, 0, 0, 0.1, 0.4, 0.2, 0.3};
  const auto top = top_k_renormalized(p, 2);
  ASSERT_EQ(top.size(), 2u);
  EXPECT_EQ(top[0].first, 5);
  EXPECT_EQ(top[1].first, 7);
  EXPECT_NEAR(top[0].second, 0.4 / 0.7, 1e-15);
  EXPECT_NEAR(top[1].second, 0.3 / 0.7, 1e-15);
  // Clipped to the four predictable tokens.
  EXPECT_EQ(top_k_renormalized(p, 10).size(), 4u);
}

TEST(MlmTest, KOneIsArgmax) {
  const MlmModel m = trained_triple_model();
  const Tokens t = {left_tok(2), Vocab::kMask, right_tok(3)};
  const std::vector<std::size_t> pos = {1};
  const TokenId best = top_k_renormalized(mlm_predict(m, t, pos)[0], 1)[0].first;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(s);
    EXPECT_EQ(mlm_sample_reconstruction(m, t, pos, 1, rng)[1], best);
  }
}

TEST(MlmTest, ReconstructionKeepsUnmaskedTokens) {
  const MlmModel m = init_mlm(kVocab, 8, 3, 2);
  const Tokens t = {left_tok(1), Vocab::kMask, right_tok(4), mid_tok(0, 0),
                    Vocab::kMask};
  const std::vector<std::size_t> pos = {1, 4};
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const Tokens out = mlm_sample_reconstruction(m, t, pos, 10, rng);
    ASSERT_EQ(out.size(), t.size());
    EXPECT_EQ(out[0], t[0]);
    EXPECT_EQ(out[2], t[2]);
    EXPECT_EQ(out[3], t[3]);
    EXPECT_FALSE(Vocab::is_reserved(out[1]));
    EXPECT_FALSE(Vocab::is_reserved(out[4]));
  }
}

TEST(MlmTest, SamplingMatchesTopKProbabilities) {
  const MlmModel m = init_mlm(kVocab, 8, 3, 12);
  const Tokens t = {left_tok(1), Vocab::kMask, right_tok(2)};
  const std::vector<std::size_t> pos = {1};
  const auto top = top_k_renormalized(mlm_predict(m, t, pos)[0], 10);
  std::map<TokenId, double> freq;
  const int draws = 100000;
  Rng rng(21);
  for (int i = 0; i < draws; ++i) {
    freq[mlm_sample_reconstruction(m, t, pos, 10, rng)[1]] += 1.0 / draws;
  }
  EXPECT_EQ(freq.size(), top.size());
  for (const auto& [id, prob] : top) EXPECT_NEAR(freq[id], prob, 0.02);
}

}  // namespace
}  // namespace gradst
