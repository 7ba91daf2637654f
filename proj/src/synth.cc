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

#include "gradst/synth.h"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradst/rng.h"
#include "json.hpp"

namespace gradst {

namespace {

constexpr std::size_t kMinFillers = 8;
constexpr std::size_t kMinTemplateLen = 4;
constexpr std::size_t kMaxTemplateLen = 8;

std::string word(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "w%03zu", i);
  return buf;
}

struct Template {
  std::vector<std::size_t> fillers;
  // Insert positions of the keyword slots in the filler sequence, sorted.
  std::vector<std::size_t> slots;
};

}  // namespace

Dataset synth_generate(const SynthSpec& spec) {
  if (spec.num_classes < 2) throw SchemaError("synth: need >= 2 classes");
  if (spec.templates_per_class == 0 || spec.keywords_per_class == 0 ||
      spec.keyword_slots == 0) {
    throw SchemaError(
        "synth: templates, keywords and keyword slots must be > 0");
  }
  if (spec.noise_rate < 0.0 || spec.noise_rate > 1.0 ||
      spec.filler_noise_rate < 0.0 || spec.filler_noise_rate > 1.0) {
    throw SchemaError("synth: noise rate outside [0, 1]");
  }
  const std::size_t n_keywords = spec.num_classes * spec.keywords_per_class;
  if (spec.vocab_size < n_keywords + kMinFillers) {
    throw SchemaError("synth: vocabulary of " +
                      std::to_string(spec.vocab_size) + " cannot hold " +
                      std::to_string(n_keywords) + " keywords plus " +
                      std::to_string(kMinFillers) + " fillers");
  }
  const std::size_t n_fillers = spec.vocab_size - n_keywords;

  Rng rng = Rng(spec.seed).child("synth");
  std::vector<std::size_t> words(spec.vocab_size);
  for (std::size_t i = 0; i < words.size(); ++i) words[i] = i;
  for (std::size_t i = words.size(); i > 1; --i) {
    std::swap(words[i - 1], words[rng.below(i)]);
  }
  // keywords[c][j], fillers[f]
  std::vector<std::vector<std::size_t>> keywords(spec.num_classes);
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t j = 0; j < spec.keywords_per_class; ++j) {
      keywords[c].push_back(words[c * spec.keywords_per_class + j]);
    }
  }
  std::vector<std::size_t> fillers(words.begin() + n_keywords, words.end());

  std::set<std::vector<std::size_t>> used;
  auto make_template = [&] {
    Template tpl;
    for (int attempt = 0;; ++attempt) {
      if (attempt > 1000) {
        throw SchemaError("synth: vocabulary too small for distinct templates");
      }
      const std::size_t len =
          kMinTemplateLen + rng.below(kMaxTemplateLen - kMinTemplateLen + 1);
      tpl.fillers.clear();
      for (std::size_t i = 0; i < len; ++i) {
        tpl.fillers.push_back(fillers[rng.below(n_fillers)]);
      }
      if (used.insert(tpl.fillers).second) break;
    }
    tpl.slots.clear();
    for (std::size_t k = 0; k < spec.keyword_slots; ++k) {
      tpl.slots.push_back(rng.below(tpl.fillers.size() + 1));
    }
    std::sort(tpl.slots.begin(), tpl.slots.end());
    return tpl;
  };
  std::vector<std::vector<Template>> templates(spec.num_classes);
  if (spec.shared_templates) {
    std::vector<Template> pool;
    for (std::size_t t = 0; t < spec.templates_per_class; ++t) {
      pool.push_back(make_template());
    }
    for (auto& per_class : templates) per_class = pool;
  } else {
    for (auto& per_class : templates) {
      for (std::size_t t = 0; t < spec.templates_per_class; ++t) {
        per_class.push_back(make_template());
      }
    }
  }

  auto utterance = [&](std::size_t c, Rng& r) {
    const Template& tpl = templates[c][r.below(templates[c].size())];
    auto keyword = [&] {
      if (r.uniform() < spec.noise_rate) return fillers[r.below(n_fillers)];
      return keywords[c][r.below(keywords[c].size())];
    };
    std::vector<std::size_t> seq;
    std::size_t next_slot = 0;
    for (std::size_t i = 0; i <= tpl.fillers.size(); ++i) {
      while (next_slot < tpl.slots.size() && tpl.slots[next_slot] == i) {
        seq.push_back(keyword());
        ++next_slot;
      }
      if (i < tpl.fillers.size()) {
        seq.push_back(r.uniform() < spec.filler_noise_rate
                          ? fillers[r.below(n_fillers)]
                          : tpl.fillers[i]);
      }
    }
    std::string text;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (i) text += ' ';
      text += word(seq[i]);
    }
    return text;
  };

  const std::size_t n_val =
      spec.validation_size ? spec.validation_size : spec.size / 10;
  const std::size_t n_test = spec.test_size ? spec.test_size : spec.size / 5;

  std::ostringstream lines;
  auto emit = [&](const char* split, std::size_t count) {
    std::vector<std::size_t> labels(count);
    for (std::size_t i = 0; i < count; ++i) labels[i] = i % spec.num_classes;
    Rng r = rng.child(split);
    for (std::size_t i = labels.size(); i > 1; --i) {
      std::swap(labels[i - 1], labels[r.below(i)]);
    }
    for (std::size_t i = 0; i < count; ++i) {
      nlohmann::json j;
      j["id"] = std::string(split) + "-" + std::to_string(i);
      j["text"] = utterance(labels[i], r);
      j["label"] = labels[i];
      j["split"] = split;
      lines << j.dump() << "\n";
    }
  };
  emit("train", spec.size);
  emit("validation", n_val);
  emit("test", n_test);

  Ontology ontology;
  ontology.task = TaskKind::kIntent;
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "intent_%02zu", c);
    ontology.classes.emplace_back(buf);
  }
  std::istringstream in(lines.str());
  return load_jsonl(in, ontology);
}

}  // namespace gradst
