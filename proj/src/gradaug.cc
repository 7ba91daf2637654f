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
#include <ostream>

#include "gradst/encoder.h"
#include "gradst/parallel.h"
#include "json.hpp"

namespace gradst {

std::string_view masking_mode_name(MaskingMode mode) {
  switch (mode) {
    case MaskingMode::kSmoothSaliency:
      return "smooth";
    case MaskingMode::kVanillaSaliency:
      return "vanilla";
    case MaskingMode::kRandom:
      return "random";
  }
  return "smooth";
}

MaskingMode parse_masking_mode(std::string_view name) {
  for (auto m : {MaskingMode::kSmoothSaliency, MaskingMode::kVanillaSaliency,
                 MaskingMode::kRandom}) {
    if (masking_mode_name(m) == name) return m;
  }
  throw InvalidInput("unknown masking mode '" + std::string(name) + "'");
}

void validate(const GradAugConfig& c) {
  if (c.q < 1) throw InvalidInput("gradaug: q must be >= 1");
  if (c.noise_count < 1) throw InvalidInput("gradaug: m must be >= 1");
  if (!(c.beta >= 0.0)) throw InvalidInput("gradaug: beta must be >= 0");
  if (!(c.noise_variance >= 0.0)) {
    throw InvalidInput("gradaug: noise variance must be >= 0");
  }
  if (!(c.mask_ratio > 0.0 && c.mask_ratio < 1.0)) {
    throw InvalidInput("gradaug: mask ratio outside (0, 1)");
  }
  if (!(c.importance_floor > 0.0)) {
    throw InvalidInput("gradaug: importance floor must be positive");
  }
  if (c.top_k < 1) throw InvalidInput("gradaug: top_k must be >= 1");
}

Vec row_sums(const Mat& g) {
  Vec m(g.rows(), 0.0);
  for (std::size_t i = 0; i < g.rows(); ++i) {
    for (double v : g.row(i)) m[i] += v;
  }
  return m;
}

Vec saliency_of_embeddings(const ModelView& teacher, const Mat& x,
                           const LabelValue& label) {
  return row_sums(teacher.grad_wrt_token_embeddings(x, label));
}

Vec saliency(const ModelView& teacher, std::span<const TokenId> tokens,
             const LabelValue& label) {
  return saliency_of_embeddings(teacher, embed(teacher.model().encoder, tokens),
                                label);
}

Vec smooth_saliency_of(const EmbeddingGradient& gradient, const Mat& x,
                       const GradAugConfig& config, Rng& rng) {
  if (config.noise_count < 1) throw InvalidInput("smooth_saliency: m < 1");
  Vec total(x.rows(), 0.0);
  for (std::size_t j = 0; j < config.noise_count; ++j) {
    Rng replicate = rng.child(j);
    Mat noisy = x;
    const Vec z = gaussian_sample(replicate, noisy.size(), config.noise_variance);
    axpy(1.0, z, noisy.flat());
    axpy(1.0, row_sums(gradient(noisy)), total);
  }
  for (double& v : total) v /= static_cast<double>(config.noise_count);
  return total;
}

Vec smooth_saliency(const ModelView& teacher, std::span<const TokenId> tokens,
                    const LabelValue& label, const GradAugConfig& config,
                    Rng& rng) {
  return smooth_saliency_of(
      [&](const Mat& x) { return teacher.grad_wrt_token_embeddings(x, label); },
      embed(teacher.model().encoder, tokens), config, rng);
}

Vec masking_probability(std::span<const double> m_smooth, double beta,
                        double floor) {
  if (m_smooth.empty()) throw InvalidInput("masking_probability: empty input");
  if (!all_finite(m_smooth)) {
    throw InvalidInput("masking_probability: non-finite saliency");
  }
  const std::size_t n = m_smooth.size();
  double top = 0.0;
  for (double v : m_smooth) top = std::max(top, std::abs(v));
  if (top == 0.0) return Vec(n, 1.0 / static_cast<double>(n));
  // Work relative to the floor so large exponents cannot overflow:
  // w_i = (importance_i / min_importance)^-beta lies in (0, 1].
  Vec importance(n);
  for (std::size_t i = 0; i < n; ++i) {
    importance[i] = std::max(std::abs(m_smooth[i]), floor * top);
  }
  const double smallest = *std::min_element(importance.begin(), importance.end());
  Vec p(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = std::pow(importance[i] / smallest, -beta);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

std::size_t mask_count(std::size_t n, double ratio) {
  const auto k = static_cast<std::size_t>(
      std::floor(ratio * static_cast<double>(n) + 0.5));
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(n, 1));
}

std::vector<std::size_t> sample_without_replacement(std::span<const double> p,
                                                    std::size_t count,
                                                    Rng& rng) {
  if (count > p.size()) {
    throw InvalidInput("sample_without_replacement: count exceeds population");
  }
  Vec weight(p.begin(), p.end());
  for (double w : weight) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw InvalidInput("sample_without_replacement: invalid weight");
    }
  }
  std::vector<std::size_t> chosen;
  for (std::size_t draw = 0; draw < count; ++draw) {
    double total = 0.0;
    for (double w : weight) total += w;
    std::size_t pick = weight.size();
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (std::size_t i = 0; i < weight.size(); ++i) {
        if (weight[i] <= 0.0) continue;
        pick = i;
        if (u < weight[i]) break;
        u -= weight[i];
      }
    } else {
      // Remaining mass is zero: fall back to uniform over the unchosen.
      std::vector<std::size_t> left;
      for (std::size_t i = 0; i < weight.size(); ++i) {
        if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) {
          left.push_back(i);
        }
      }
      pick = left[rng.below(left.size())];
    }
    chosen.push_back(pick);
    weight[pick] = 0.0;
  }
  return chosen;
}

MaskedTokens mask_tokens(std::span<const TokenId> tokens,
                         std::span<const double> p, double mask_ratio,
                         Rng& rng) {
  if (tokens.empty()) throw InvalidInput("mask_tokens: empty input");
  if (p.size() != tokens.size()) {
    throw InvalidInput("mask_tokens: distribution length mismatch");
  }
  MaskedTokens out;
  out.tokens.assign(tokens.begin(), tokens.end());
  out.positions = sample_without_replacement(
      p, mask_count(tokens.size(), mask_ratio), rng);
  std::sort(out.positions.begin(), out.positions.end());
  for (std::size_t pos : out.positions) out.tokens[pos] = Vocab::kMask;
  return out;
}

GradAugResult gradaug(std::span<const Example> labeled,
                      const TaskModel& teacher, const MlmModel& mlm,
                      const GradAugConfig& config, std::uint64_t seed,
                      std::size_t workers) {
  validate(config);
  const ModelView view(teacher);
  struct PerExample {
    std::vector<Example> augmented;
    std::vector<AugmentationRecord> records;
    std::string failure;
  };
  std::vector<PerExample> results(labeled.size());

  parallel_for(labeled.size(), workers, [&](std::size_t idx) {
    const Example& src = labeled[idx];
    PerExample& out = results[idx];
    try {
      if (!src.label) throw InvalidInput("unlabeled example");
      Rng base = Rng(seed).child("gradaug").child(src.id);
      SaliencyProfile profile;
      switch (config.mode) {
        case MaskingMode::kRandom:
          profile.p.assign(src.tokens.size(),
                           1.0 / static_cast<double>(src.tokens.size()));
          break;
        case MaskingMode::kVanillaSaliency:
          profile.m_raw = saliency(view, src.tokens, *src.label);
          profile.m_smooth = profile.m_raw;
          break;
        case MaskingMode::kSmoothSaliency: {
          profile.m_raw = saliency(view, src.tokens, *src.label);
          Rng noise = base.child("noise");
          profile.m_smooth =
              smooth_saliency(view, src.tokens, *src.label, config, noise);
          break;
        }
      }
      if (profile.p.empty()) {
        profile.p = masking_probability(profile.m_smooth, config.beta,
                                        config.importance_floor);
      }
      for (std::size_t j = 0; j < config.q; ++j) {
        Rng aug = base.child("aug").child(j);
        MaskedTokens masked =
            mask_tokens(src.tokens, profile.p, config.mask_ratio, aug);
        Tokens rebuilt = mlm_sample_reconstruction(
            mlm, masked.tokens, masked.positions, config.top_k, aug);
        AugmentationRecord rec;
        rec.source_id = src.id;
        rec.index = j;
        rec.positions = masked.positions;
        for (std::size_t pos : masked.positions) {
          rec.replacements.push_back(rebuilt[pos]);
        }
        rec.profile = profile;
        Example ex;
        ex.id = src.id + "#aug" + std::to_string(j);
        ex.dialog = src.dialog;
        ex.tokens = std::move(rebuilt);
        ex.label = src.label;
        ex.split = src.split;
        out.augmented.push_back(std::move(ex));
        out.records.push_back(std::move(rec));
      }
    } catch (const std::exception& e) {
      out.augmented.clear();
      out.records.clear();
      out.failure = src.id + ": " + e.what();
    }
  });

  GradAugResult result;
  result.augmented.assign(labeled.begin(), labeled.end());
  for (auto& r : results) {
    for (auto& ex : r.augmented) result.augmented.push_back(std::move(ex));
    for (auto& rec : r.records) result.records.push_back(std::move(rec));
    if (!r.failure.empty()) result.failures.push_back(std::move(r.failure));
  }
  return result;
}

void write_augmentation_dump(const GradAugResult& result, const Vocab* vocab,
                             std::ostream& out) {
  std::map<std::string, const Example*> by_id;
  for (const auto& ex : result.augmented) by_id.emplace(ex.id, &ex);
  for (const auto& rec : result.records) {
    nlohmann::json j;
    j["source_id"] = rec.source_id;
    j["index"] = rec.index;
    j["positions"] = rec.positions;
    j["replacements"] = rec.replacements;
    j["saliency"] = rec.profile.m_raw;
    j["smooth_saliency"] = rec.profile.m_smooth;
    j["mask_probability"] = rec.profile.p;
    if (vocab) {
      auto words = [&](const Tokens& t) {
        std::vector<std::string> w;
        for (TokenId id : t) w.push_back(vocab->token(id));
        return w;
      };
      j["replacement_tokens"] = words(rec.replacements);
      const std::string aug_id = rec.source_id + "#aug" +
                                 std::to_string(rec.index);
      if (auto src = by_id.find(rec.source_id); src != by_id.end()) {
        j["source_tokens"] = words(src->second->tokens);
      }
      if (auto aug = by_id.find(aug_id); aug != by_id.end()) {
        j["augmented_tokens"] = words(aug->second->tokens);
      }
    }
    out << j.dump() << "\n";
  }
}

}  // namespace gradst
