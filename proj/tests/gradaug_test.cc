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

#include "gradst/gradaug.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <vector>

#include "gradst/encoder.h"
#include "gradst/selfcheck.h"
#include "gtest/gtest.h"
#include "json.hpp"

namespace gradst {
namespace {

constexpr std::size_t kVocab = 16;

Tokens random_tokens(Rng& rng, std::size_t n) {
  Tokens t;
  for (std::size_t i = 0; i < n; ++i) {
    t.push_back(static_cast<TokenId>(Vocab::kNumReserved +
                                     rng.below(kVocab - Vocab::kNumReserved)));
  }
  return t;
}

TEST(SaliencyTest, MatchesFiniteDifferenceRowSums) {
  Rng rng(31);
  for (TaskKind task : {TaskKind::kIntent, TaskKind::kDialogAct,
                        TaskKind::kDialogState, TaskKind::kResponseSelection}) {
    for (int trial = 0; trial < 5; ++trial) {
      const TaskModel model = make_probe_model(task, kVocab, 5, 4, rng);
      const LabelValue y = random_label(model, rng);
      const Tokens tokens = random_tokens(rng, 1 + rng.below(6));
      const ModelView view(model);
      const Mat x = embed(model.encoder, tokens);
      const Vec fd = finite_difference_grad(
          [&](std::span<const double> flat) {
            return view.scalar_score_for_label(
                Mat(x.rows(), x.cols(), Vec(flat.begin(), flat.end())), y);
          },
          x.flat(), 1e-5);
      Vec expected(x.rows(), 0.0);
      for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t c = 0; c < x.cols(); ++c) {
          expected[i] += fd[i * x.cols() + c];
        }
      }
      const Vec m = saliency(view, tokens, y);
      ASSERT_EQ(m.size(), tokens.size());
      EXPECT_LT(relative_error(m, expected), 1e-4) << task_kind_name(task);
    }
  }
}

TEST(SaliencyTest, ZeroVarianceSmoothEqualsVanilla) {
  Rng rng(2);
  GradAugConfig cfg;
  cfg.noise_variance = 0.0;
  for (std::size_t m : {1u, 7u, 20u}) {
    cfg.noise_count = m;
    const TaskModel model = make_probe_model(TaskKind::kIntent, kVocab, 4, 4, rng);
    const LabelValue y = random_label(model, rng);
    const Tokens tokens = random_tokens(rng, 5);
    const ModelView view(model);
    Rng noise(9);
    const Vec smooth = smooth_saliency(view, tokens, y, cfg, noise);
    const Vec plain = saliency(view, tokens, y);
    for (std::size_t i = 0; i < plain.size(); ++i) {
      EXPECT_NEAR(smooth[i], plain[i], 1e-12);
    }
  }
}

TEST(SaliencyTest, LinearScoreIsNoiseInvariant) {
  // F(X) = w . mean_rows(X): every row of dF/dX is w / n.
  const Vec w = {0.3, -1.2, 2.0, 0.7};
  const std::size_t n = 6;
  const double expected = std::accumulate(w.begin(), w.end(), 0.0) / n;
  const EmbeddingGradient grad = [&](const Mat& x) {
    Mat g(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t c = 0; c < x.cols(); ++c) g(i, c) = w[c] / x.rows();
    }
    return g;
  };
  Rng rng(5);
  Mat x(n, w.size());
  for (double& v : x.flat()) v = rng.normal();
  for (double variance : {1e-4, 1.0, 25.0}) {
    for (std::size_t m : {1u, 20u, 33u}) {
      GradAugConfig cfg;
      cfg.noise_variance = variance;
      cfg.noise_count = m;
      Rng noise(m);
      const Vec smooth = smooth_saliency_of(grad, x, cfg, noise);
      for (double v : smooth) EXPECT_NEAR(v, expected, 1e-12);
    }
  }
}

TEST(SaliencyTest, SmoothIsReproducible) {
  Rng rng(8);
  const TaskModel model = make_probe_model(TaskKind::kIntent, kVocab, 4, 4, rng);
  const LabelValue y = random_label(model, rng);
  const Tokens tokens = random_tokens(rng, 4);
  const ModelView view(model);
  GradAugConfig cfg;
  cfg.noise_count = 1;
  Rng a(3), b(3);
  EXPECT_EQ(smooth_saliency(view, tokens, y, cfg, a),
            smooth_saliency(view, tokens, y, cfg, b));
  cfg.noise_count = 0;
  EXPECT_THROW(smooth_saliency(view, tokens, y, cfg, a), InvalidInput);
}

TEST(MaskingProbabilityTest, HandEvaluated) {
  const Vec p = masking_probability(Vec{1, 2, 4}, 1.0);
  EXPECT_NEAR(p[0], 4.0 / 7.0, 1e-15);
  EXPECT_NEAR(p[1], 2.0 / 7.0, 1e-15);
  EXPECT_NEAR(p[2], 1.0 / 7.0, 1e-15);
  // Only magnitudes matter.
  const Vec q = masking_probability(Vec{-1, 2, -4}, 1.0);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(q[i], p[i], 1e-15);
}

TEST(MaskingProbabilityTest, UniformCases) {
  for (const Vec& m : {Vec{3, 0.5, 9}, Vec{0, 0, 0}}) {
    const Vec flat = masking_probability(m, 0.0);
    for (double v : flat) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  }
  for (double v : masking_probability(Vec{2, 2, 2, 2}, 1.0)) {
    EXPECT_NEAR(v, 0.25, 1e-15);
  }
  for (double v : masking_probability(Vec{0, 0}, 1.0)) EXPECT_EQ(v, 0.5);
}

TEST(MaskingProbabilityTest, FloorKeepsZerosFinite) {
  const Vec p = masking_probability(Vec{0.0, 1.0}, 1.0, 1e-6);
  // Importances are 1e-6 and 1.
  EXPECT_NEAR(p[0], 1.0 / (1.0 + 1e-6), 1e-12);
  EXPECT_NEAR(p[1], 1e-6 / (1.0 + 1e-6), 1e-12);
}

TEST(MaskingProbabilityTest, DistributionAndMonotone) {
  Rng rng(17);
  for (int trial = 0; trial < 2000; ++trial) {
    Vec m(1 + rng.below(10));
    for (double& v : m) {
      const double u = rng.uniform();
      v = u < 0.2 ? 0.0 : (rng.uniform() - 0.5) * 10.0;
    }
    const double beta = rng.uniform() * 3.0;
    const Vec p = masking_probability(m, beta);
    double total = 0.0;
    for (double v : p) {
      EXPECT_GE(v, 0.0);
      total += v;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    double big = 0.0;
    for (double v : m) big = std::max(big, std::abs(v));
    for (std::size_t i = 0; i < m.size(); ++i) {
      for (std::size_t j = 0; j < m.size(); ++j) {
        if (beta > 0 && std::abs(m[i]) > std::abs(m[j]) &&
            std::abs(m[j]) > 1e-6 * big) {
          EXPECT_LT(p[i], p[j]);
        }
      }
    }
  }
}

TEST(MaskTokensTest, MaskCount) {
  EXPECT_EQ(mask_count(1, 0.15), 1u);
  EXPECT_EQ(mask_count(3, 0.15), 1u);
  EXPECT_EQ(mask_count(10, 0.15), 2u);
  EXPECT_EQ(mask_count(20, 0.15), 3u);
  EXPECT_EQ(mask_count(100, 0.15), 15u);
}

TEST(MaskTokensTest, SingleTokenAlwaysMasked) {
  Rng rng(1);
  const Tokens t = {7};
  const MaskedTokens m = mask_tokens(t, Vec{1.0}, 0.15, rng);
  EXPECT_EQ(m.tokens, Tokens{Vocab::kMask});
  EXPECT_EQ(m.positions, std::vector<std::size_t>{0});
}

TEST(MaskTokensTest, OneHotPositionAlwaysChosen) {
  Rng rng(2);
  const Tokens t = {5, 6, 7, 8};
  for (int i = 0; i < 100; ++i) {
    const MaskedTokens m = mask_tokens(t, Vec{0, 0, 1, 0}, 0.15, rng);
    EXPECT_EQ(m.positions, std::vector<std::size_t>{2});
    EXPECT_EQ(m.tokens[2], Vocab::kMask);
    EXPECT_EQ(m.tokens[0], 5);
  }
}

TEST(MaskTokensTest, FrequenciesFollowP) {
  Rng rng(3);
  const Tokens t = {5, 6, 7};
  const Vec p = {4.0 / 7, 2.0 / 7, 1.0 / 7};
  Vec freq(3, 0.0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    freq[mask_tokens(t, p, 0.15, rng).positions[0]] += 1.0 / draws;
  }
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(freq[i], p[i], 0.01);
}

// Exact inclusion probabilities of sequential draw-and-remove sampling,
// enumerating every ordered sequence of distinct positions.
void enumerate(const Vec& p, std::size_t count, std::vector<char>& used,
               double prob, double remaining, Vec& inclusion,
               std::vector<std::size_t>& path) {
  if (path.size() == count) {
    for (auto i : path) inclusion[i] += prob;
    return;
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (used[i] || p[i] == 0.0) continue;
    used[i] = 1;
    path.push_back(i);
    enumerate(p, count, used, prob * p[i] / remaining, remaining - p[i],
              inclusion, path);
    path.pop_back();
    used[i] = 0;
  }
}

TEST(SamplerTest, InclusionMatchesEnumeration) {
  Rng rng(44);
  for (int trial = 0; trial < 3; ++trial) {
    const std::size_t n = 3 + rng.below(4);
    const std::size_t count = 1 + rng.below(n - 1);
    Vec p(n);
    for (double& v : p) v = 0.05 + rng.uniform();
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    for (double& v : p) v /= total;
    Vec exact(n, 0.0);
    std::vector<char> used(n, 0);
    std::vector<std::size_t> path;
    enumerate(p, count, used, 1.0, 1.0, exact, path);
    Vec freq(n, 0.0);
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
      const auto picked = sample_without_replacement(p, count, rng);
      ASSERT_EQ(picked.size(), count);
      for (auto j : picked) freq[j] += 1.0 / draws;
    }
    for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(freq[j], exact[j], 0.01);
  }
}

TEST(SamplerTest, DistinctAndErrors) {
  Rng rng(5);
  const Vec p = {0.2, 0.3, 0.5};
  auto all = sample_without_replacement(p, 3, rng);
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_THROW(sample_without_replacement(p, 4, rng), InvalidInput);
  EXPECT_THROW(sample_without_replacement(Vec{0.5, -0.1}, 1, rng),
               InvalidInput);
}

TEST(MaskTokensTest, ImportantTokenMaskedLeast) {
  // One token with a much larger smooth saliency than the rest.
  const Vec m = {0.02, -0.03, 0.9, 0.01, 0.04, -0.02, 0.03};
  const Vec p = masking_probability(m, 1.0);
  const Tokens t = {5, 6, 7, 8, 9, 10, 11};
  Vec freq(t.size(), 0.0);
  Rng rng(12);
  for (int i = 0; i < 10000; ++i) {
    for (auto pos : mask_tokens(t, p, 0.15, rng).positions) freq[pos] += 1;
  }
  EXPECT_EQ(std::min_element(freq.begin(), freq.end()) - freq.begin(), 2);
}

struct AugFixture {
  TaskModel teacher;
  MlmModel mlm;
  std::vector<Example> labeled;
};

AugFixture make_fixture(std::size_t n) {
  Rng rng(70);
  AugFixture f{make_probe_model(TaskKind::kIntent, kVocab, 4, 4, rng),
               init_mlm(kVocab, 8, 3, 1),
               {}};
  for (std::size_t i = 0; i < n; ++i) {
    Example e;
    e.id = "ex" + std::to_string(i);
    e.tokens = random_tokens(rng, 2 + rng.below(8));
    e.label = random_label(f.teacher, rng);
    f.labeled.push_back(e);
  }
  return f;
}

TEST(GradAugTest, SizesAndLabels) {
  const AugFixture f = make_fixture(100);
  GradAugConfig cfg;
  const auto before = f.labeled;
  const GradAugResult r = gradaug(f.labeled, f.teacher, f.mlm, cfg, 4);
  EXPECT_EQ(f.labeled, before);
  ASSERT_EQ(r.augmented.size(), 400u);
  EXPECT_TRUE(r.failures.empty());
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(r.augmented[i], f.labeled[i]);
  std::map<std::string, const Example*> by_id;
  for (const auto& e : f.labeled) by_id[e.id] = &e;
  ASSERT_EQ(r.records.size(), 300u);
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    const Example& aug = r.augmented[100 + i];
    const Example& src = *by_id.at(r.records[i].source_id);
    EXPECT_EQ(aug.label, src.label);
    EXPECT_EQ(aug.tokens.size(), src.tokens.size());
    EXPECT_EQ(r.records[i].positions.size(), mask_count(src.tokens.size(), 0.15));
    for (std::size_t j = 0; j < src.tokens.size(); ++j) {
      const bool masked =
          std::count(r.records[i].positions.begin(),
                     r.records[i].positions.end(), j) > 0;
      if (!masked) EXPECT_EQ(aug.tokens[j], src.tokens[j]);
    }
  }
}

TEST(GradAugTest, DeterministicAndParallelSafe) {
  const AugFixture f = make_fixture(20);
  GradAugConfig cfg;
  const auto a = gradaug(f.labeled, f.teacher, f.mlm, cfg, 9, 1);
  const auto b = gradaug(f.labeled, f.teacher, f.mlm, cfg, 9, 4);
  EXPECT_EQ(a.augmented, b.augmented);
  const auto c = gradaug(f.labeled, f.teacher, f.mlm, cfg, 10, 1);
  EXPECT_NE(a.augmented, c.augmented);
}

TEST(GradAugTest, FailingExampleKeepsOriginalOnly) {
  AugFixture f = make_fixture(3);
  f.labeled[1].label.reset();
  GradAugConfig cfg;
  const auto r = gradaug(f.labeled, f.teacher, f.mlm, cfg, 1);
  EXPECT_EQ(r.augmented.size(), 3u + 2u * cfg.q);
  ASSERT_EQ(r.failures.size(), 1u);
  EXPECT_EQ(r.failures[0].rfind("ex1: ", 0), 0u);
}

TEST(GradAugTest, Modes) {
  const AugFixture f = make_fixture(5);
  GradAugConfig cfg;
  cfg.mode = MaskingMode::kRandom;
  for (const auto& rec : gradaug(f.labeled, f.teacher, f.mlm, cfg, 1).records) {
    for (double v : rec.profile.p) {
      EXPECT_DOUBLE_EQ(v, 1.0 / static_cast<double>(rec.profile.p.size()));
    }
  }
  cfg.mode = MaskingMode::kVanillaSaliency;
  for (const auto& rec : gradaug(f.labeled, f.teacher, f.mlm, cfg, 1).records) {
    EXPECT_EQ(rec.profile.m_raw, rec.profile.m_smooth);
  }
  EXPECT_EQ(parse_masking_mode(masking_mode_name(MaskingMode::kSmoothSaliency)),
            MaskingMode::kSmoothSaliency);
  EXPECT_THROW(parse_masking_mode("nope"), InvalidInput);
}

TEST(GradAugTest, ConfigValidation) {
  GradAugConfig cfg;
  EXPECT_NO_THROW(validate(cfg));
  cfg.q = 0;
  EXPECT_THROW(validate(cfg), InvalidInput);
  cfg = GradAugConfig{};
  cfg.mask_ratio = 1.0;
  EXPECT_THROW(validate(cfg), InvalidInput);
  cfg = GradAugConfig{};
  cfg.beta = -1.0;
  EXPECT_THROW(validate(cfg), InvalidInput);
}

TEST(GradAugTest, DumpIsJsonLines) {
  const AugFixture f = make_fixture(2);
  GradAugConfig cfg;
  cfg.q = 2;
  std::ostringstream out;
  write_augmentation_dump(gradaug(f.labeled, f.teacher, f.mlm, cfg, 1), nullptr,
                          out);
  std::istringstream in(out.str());
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("source_id"));
    EXPECT_TRUE(j.contains("positions"));
    ++lines;
  }
  EXPECT_EQ(lines, 4);
}

}  // namespace
}  // namespace gradst
