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

// Gradient-guided augmentation. Tokens the teacher's prediction depends on
// least are the most likely to be masked; masked positions are then filled
// in by the masked-token model, and the source label is kept.

#ifndef GRADST_GRADAUG_H_
#define GRADST_GRADAUG_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "gradst/corpus.h"
#include "gradst/heads.h"
#include "gradst/mlm.h"
#include "gradst/numeric.h"

namespace gradst {

enum class MaskingMode {
  kSmoothSaliency,
  // Single un-noised gradient pass.
  kVanillaSaliency,
  // Uniform masking distribution, no teacher involved.
  kRandom,
};

std::string_view masking_mode_name(MaskingMode mode);
MaskingMode parse_masking_mode(std::string_view name);

struct GradAugConfig {
  std::size_t q = 3;              // augmentations per input
  double beta = 1.0;              // flatness of the masking distribution
  std::size_t noise_count = 20;   // Gaussian replicates m
  double noise_variance = 1e-4;   // diagonal covariance
  double mask_ratio = 0.15;
  double importance_floor = 1e-6;  // relative to the largest importance
  std::size_t top_k = 10;          // reconstruction candidates
  MaskingMode mode = MaskingMode::kSmoothSaliency;
};

// Throws InvalidInput on out-of-range fields.
void validate(const GradAugConfig& config);

struct SaliencyProfile {
  Vec m_raw;
  Vec m_smooth;
  Vec p;
};

// Sum over embedding dimensions of dF_y/dX_i for each token i. Throws
// InvalidInput when the gradient is non-finite.
Vec saliency(const ModelView& teacher, std::span<const TokenId> tokens,
             const LabelValue& label);
Vec saliency_of_embeddings(const ModelView& teacher, const Mat& x,
                           const LabelValue& label);
// Per-row sums of an n x d gradient.
Vec row_sums(const Mat& g);

// dF/dX for an arbitrary scalar score of the embedding matrix.
using EmbeddingGradient = std::function<Mat(const Mat& x)>;

// Mean saliency over noise_count copies of X, each with its own i.i.d.
// N(0, noise_variance) perturbation of every entry.
Vec smooth_saliency(const ModelView& teacher, std::span<const TokenId> tokens,
                    const LabelValue& label, const GradAugConfig& config,
                    Rng& rng);
// The same average for any score, given its gradient.
Vec smooth_saliency_of(const EmbeddingGradient& gradient, const Mat& x,
                       const GradAugConfig& config, Rng& rng);

// p_i proportional to importance_i^-beta, where importance is |M| floored at
// floor * max|M|. Uniform when every M is zero.
Vec masking_probability(std::span<const double> m_smooth, double beta,
                        double floor = 1e-6);

// max(1, round-half-up(ratio * n)).
std::size_t mask_count(std::size_t n, double ratio);

// Draws positions one at a time proportionally to p, removing each drawn
// position and renormalising. Returns the chosen positions in draw order.
std::vector<std::size_t> sample_without_replacement(std::span<const double> p,
                                                    std::size_t count,
                                                    Rng& rng);

struct MaskedTokens {
  Tokens tokens;
  std::vector<std::size_t> positions;  // ascending
};

MaskedTokens mask_tokens(std::span<const TokenId> tokens,
                         std::span<const double> p, double mask_ratio,
                         Rng& rng);

struct AugmentationRecord {
  std::string source_id;
  std::size_t index = 0;
  std::vector<std::size_t> positions;
  Tokens replacements;
  SaliencyProfile profile;
};

struct GradAugResult {
  // Originals first, in input order, then q augmentations per example.
  std::vector<Example> augmented;
  std::vector<AugmentationRecord> records;
  // "<id>: <reason>" for examples that contributed only their original.
  std::vector<std::string> failures;
};

// Random substreams are keyed by (seed, example id, replicate or
// augmentation index), so the output does not depend on `workers`.
GradAugResult gradaug(std::span<const Example> labeled,
                      const TaskModel& teacher, const MlmModel& mlm,
                      const GradAugConfig& config, std::uint64_t seed,
                      std::size_t workers = 1);

// One JSON object per augmentation. Token strings are written when vocab is
// given.
void write_augmentation_dump(const GradAugResult& result, const Vocab* vocab,
                             std::ostream& out);

}  // namespace gradst

#endif  // GRADST_GRADAUG_H_
