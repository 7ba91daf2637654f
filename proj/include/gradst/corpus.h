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

#ifndef GRADST_CORPUS_H_
#define GRADST_CORPUS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace gradst {

enum class TaskKind { kIntent, kDialogState, kDialogAct, kResponseSelection };

std::string_view task_kind_name(TaskKind kind);
TaskKind parse_task_kind(std::string_view name);

using TokenId = std::int32_t;
using Tokens = std::vector<TokenId>;

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SplitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Vocab {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kMask = 1;
  static constexpr TokenId kUnk = 2;
  static constexpr TokenId kSep = 3;
  static constexpr TokenId kNumReserved = 4;

  Vocab();

  // Returns the id of token, inserting it if new.
  TokenId add(std::string_view token);
  // Unknown tokens map to kUnk.
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::size_t size() const { return tokens_.size(); }

  static bool is_reserved(TokenId id) { return id >= 0 && id < kNumReserved; }

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

struct SingleClass {
  int index = 0;
  bool operator==(const SingleClass&) const = default;
};
// One bit per dialog-act intent.
struct MultiLabel {
  std::vector<std::uint8_t> bits;
  bool operator==(const MultiLabel&) const = default;
};
// Value index per (domain, slot) pair; every pair carries a value, possibly
// the pair's "none" value.
struct SlotAssignment {
  std::vector<int> values;
  bool operator==(const SlotAssignment&) const = default;
};
// Index of the ground-truth response in the candidate pool.
struct ResponseRef {
  int index = 0;
  bool operator==(const ResponseRef&) const = default;
};

using LabelValue = std::variant<SingleClass, MultiLabel, SlotAssignment,
                                ResponseRef>;

std::string describe(const LabelValue& label);

struct SlotOntology {
  std::string domain;
  std::string slot;
  std::vector<std::string> values;
  int none_index = 0;
  bool operator==(const SlotOntology&) const = default;
};

struct Ontology {
  TaskKind task = TaskKind::kIntent;
  std::vector<std::string> classes;
  std::optional<int> out_of_scope_class;
  std::vector<std::string> da_intents;
  std::vector<SlotOntology> slots;
  std::vector<std::string> responses;

  bool operator==(const Ontology&) const = default;
};

// Throws SchemaError when the label kind does not match the task or an index
// is outside the ontology.
void validate_label(const Ontology& ontology, const LabelValue& label);

enum class SplitKind { kTrain, kValidation, kTest };

std::string_view split_name(SplitKind split);

struct Example {
  std::string id;
  // Source utterances; a single element for plain-text records.
  std::vector<std::string> turns;
  // True when the record came from a "turns" array.
  bool dialog = false;
  Tokens tokens;
  std::optional<LabelValue> label;
  SplitKind split = SplitKind::kTrain;

  bool operator==(const Example&) const = default;
};

struct Dataset {
  Ontology ontology;
  Vocab vocab;
  std::vector<Example> train;
  std::vector<Example> validation;
  std::vector<Example> test;
  // Token sequences of every slot value, indexed [pair][value].
  std::vector<std::vector<Tokens>> slot_value_tokens;
  std::vector<Tokens> response_tokens;

  bool operator==(const Dataset&) const = default;
};

struct LoadOptions {
  // Longer inputs drop their oldest tokens first.
  std::size_t max_tokens = 128;
};

// Lowercases ASCII, splits on whitespace, and emits each punctuation
// character as its own token.
std::vector<std::string> tokenize(std::string_view text);

// Flattens turns into one sequence separated by [SEP] and left-truncates.
Tokens encode_turns(const Vocab& vocab, std::span<const std::string> turns,
                    std::size_t max_tokens);

Ontology parse_ontology(std::string_view json_text);
Ontology load_ontology(const std::filesystem::path& path);
std::string ontology_to_json(const Ontology& ontology);
void save_ontology(const Ontology& ontology,
                   const std::filesystem::path& path);

// One JSON object per line. The vocabulary is built from the training split
// and the ontology; tokens seen only in validation/test map to [UNK].
Dataset load_jsonl(std::istream& corpus, const Ontology& ontology,
                   const LoadOptions& options = {});
Dataset load_jsonl(const std::filesystem::path& corpus,
                   const std::filesystem::path& ontology,
                   const LoadOptions& options = {});

void save_jsonl(const Dataset& dataset, std::ostream& out);
void save_jsonl(const Dataset& dataset, const std::filesystem::path& path);

// Ground truth of the examples whose labels were stripped into U. Only
// evaluation code reads it; the self-training loop never sees a label from
// here.
class SealedLabels {
 public:
  void seal(const std::string& id, LabelValue label);
  const LabelValue* lookup(const std::string& id) const;
  std::size_t size() const { return labels_.size(); }

 private:
  std::map<std::string, LabelValue> labels_;
};

struct FewShotSplit {
  std::vector<Example> labeled;
  std::vector<Example> unlabeled;
  SealedLabels sealed;
};

// |L| = round(fraction * |labeled train|), drawn at random. Single-class
// tasks are sampled per class in proportion to class size, with at least one
// example per class. Records that were unlabeled in the corpus go straight
// to U.
FewShotSplit few_shot_split(const Dataset& dataset, double fraction,
                            std::uint64_t seed);

}  // namespace gradst

#endif  // GRADST_CORPUS_H_
