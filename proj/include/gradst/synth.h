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

#ifndef GRADST_SYNTH_H_
#define GRADST_SYNTH_H_

#include <cstddef>
#include <cstdint>

#include "gradst/corpus.h"

namespace gradst {

// Templated intent corpus. Every utterance is a filler template with
// keyword_slots slots, each holding one of its class's keyword synonyms (or,
// with probability noise_rate, a random filler). Only the keywords identify
// the class when templates are shared, and an utterance usually mixes
// several synonyms, so synonyms unseen in a small labeled set co-occur with
// seen ones.
struct SynthSpec {
  std::size_t num_classes = 20;
  // Distinct content words (keywords + fillers).
  std::size_t vocab_size = 200;
  std::size_t templates_per_class = 4;
  std::size_t keywords_per_class = 8;
  std::size_t keyword_slots = 2;
  // Probability that a keyword slot holds a random filler instead.
  double noise_rate = 0.1;
  // Probability that a template filler is swapped for a random filler.
  double filler_noise_rate = 0.2;
  // One template pool used by every class, so only keywords identify the
  // class. Otherwise each class draws its own templates.
  bool shared_templates = true;
  std::size_t size = 5000;
  // Zero means size / 10 and size / 5 respectively.
  std::size_t validation_size = 0;
  std::size_t test_size = 0;
  std::uint64_t seed = 0;
};

// Throws SchemaError when the vocabulary cannot hold the keywords plus
// enough fillers for distinct templates.
Dataset synth_generate(const SynthSpec& spec);

}  // namespace gradst

#endif  // GRADST_SYNTH_H_
