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

#include "gradst/corpus.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "gradst/rng.h"
#include "json.hpp"

namespace gradst {

using nlohmann::json;

namespace {

constexpr const char* kReservedTokens[] = {"[PAD]", "[MASK]", "[UNK]",
                                           "[SEP]"};

// Raw corpus record before tokenization.
struct Record {
  std::string id;
  std::vector<std::string> turns;
  bool dialog = false;
  std::optional<LabelValue> label;
  SplitKind split = SplitKind::kTrain;
};

SplitKind parse_split(const std::string& s) {
  if (s == "train") return SplitKind::kTrain;
  if (s == "validation") return SplitKind::kValidation;
  if (s == "test") return SplitKind::kTest;
  throw SchemaError("unknown split '" + s + "'");
}

int as_index(const json& j, const char* what) {
  if (!j.is_number_integer()) {
    throw SchemaError(std::string(what) + " must be an integer");
  }
  return j.get<int>();
}

LabelValue parse_label(const Ontology& ontology, const json& j) {
  switch (ontology.task) {
    case TaskKind::kIntent:
      return SingleClass{as_index(j, "intent label")};
    case TaskKind::kResponseSelection:
      return ResponseRef{as_index(j, "response label")};
    case TaskKind::kDialogAct: {
      if (!j.is_array()) {
        throw SchemaError("dialog-act label must be a list of intent ids");
      }
      MultiLabel m;
      m.bits.assign(ontology.da_intents.size(), 0);
      for (const auto& v : j) {
        const int idx = as_index(v, "dialog-act intent");
        if (idx < 0 || idx >= static_cast<int>(m.bits.size())) {
          throw SchemaError("dialog-act intent " + std::to_string(idx) +
                            " outside ontology");
        }
        m.bits[idx] = 1;
      }
      return m;
    }
    case TaskKind::kDialogState: {
      if (!j.is_array()) {
        throw SchemaError("dialog-state label must be a list of assignments");
      }
      SlotAssignment a;
      for (const auto& slot : ontology.slots) a.values.push_back(slot.none_index);
      for (const auto& entry : j) {
        if (!entry.is_object() || !entry.contains("pair") ||
            !entry.contains("value")) {
          throw SchemaError("dialog-state assignment needs pair and value");
        }
        const int pair = as_index(entry["pair"], "pair");
        const int value = as_index(entry["value"], "value");
        if (pair < 0 || pair >= static_cast<int>(a.values.size())) {
          throw SchemaError("slot pair " + std::to_string(pair) +
                            " outside ontology");
        }
        a.values[pair] = value;
      }
      return a;
    }
  }
  throw SchemaError("unknown task");
}

json label_to_json(const Ontology& ontology, const LabelValue& label) {
  return std::visit(
      [&](const auto& l) -> json {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, SingleClass>) {
          return l.index;
        } else if constexpr (std::is_same_v<T, ResponseRef>) {
          return l.index;
        } else if constexpr (std::is_same_v<T, MultiLabel>) {
          json out = json::array();
          for (std::size_t i = 0; i < l.bits.size(); ++i) {
            if (l.bits[i]) out.push_back(i);
          }
          return out;
        } else {
          json out = json::array();
          for (std::size_t p = 0; p < l.values.size(); ++p) {
            if (l.values[p] == ontology.slots[p].none_index) continue;
            out.push_back({{"pair", p}, {"value", l.values[p]}});
          }
          return out;
        }
      },
      label);
}

Record parse_record(const Ontology& ontology, const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what());
  }
  if (!j.is_object()) throw ParseError("record is not a JSON object");
  Record r;
  if (!j.contains("id") || !j["id"].is_string()) {
    throw SchemaError("record needs a string id");
  }
  r.id = j["id"].get<std::string>();
  if (j.contains("turns")) {
    if (!j["turns"].is_array()) throw SchemaError("turns must be an array");
    for (const auto& t : j["turns"]) {
      if (!t.is_string()) throw SchemaError("turns must be strings");
      r.turns.push_back(t.get<std::string>());
    }
    r.dialog = true;
  } else if (j.contains("text") && j["text"].is_string()) {
    r.turns.push_back(j["text"].get<std::string>());
  } else {
    throw SchemaError("record needs text or turns");
  }
  r.split = parse_split(j.value("split", std::string("train")));
  if (j.contains("label") && !j["label"].is_null()) {
    r.label = parse_label(ontology, j["label"]);
    validate_label(ontology, *r.label);
  }
  return r;
}

}  // namespace

std::string_view task_kind_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::kIntent:
      return "intent";
    case TaskKind::kDialogState:
      return "dst";
    case TaskKind::kDialogAct:
      return "dialog_act";
    case TaskKind::kResponseSelection:
      return "response_selection";
  }
  return "unknown";
}

TaskKind parse_task_kind(std::string_view name) {
  for (TaskKind k : {TaskKind::kIntent, TaskKind::kDialogState,
                     TaskKind::kDialogAct, TaskKind::kResponseSelection}) {
    if (task_kind_name(k) == name) return k;
  }
  throw SchemaError("unknown task kind '" + std::string(name) + "'");
}

std::string_view split_name(SplitKind split) {
  switch (split) {
    case SplitKind::kTrain:
      return "train";
    case SplitKind::kValidation:
      return "validation";
    case SplitKind::kTest:
      return "test";
  }
  return "train";
}

Vocab::Vocab() {
  for (const char* t : kReservedTokens) add(t);
}

TokenId Vocab::add(std::string_view token) {
  const std::string key(token);
  if (auto it = ids_.find(key); it != ids_.end()) return it->second;
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.push_back(key);
  ids_.emplace(key, id);
  return id;
}

TokenId Vocab::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const {
  return ids_.count(std::string(token)) > 0;
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw SchemaError("token id " + std::to_string(id) + " outside vocabulary");
  }
  return tokens_[id];
}

std::string describe(const LabelValue& label) {
  return std::visit(
      [](const auto& l) -> std::string {
        using T = std::decay_t<decltype(l)>;
        std::ostringstream os;
        if constexpr (std::is_same_v<T, SingleClass>) {
          os << "class:" << l.index;
        } else if constexpr (std::is_same_v<T, ResponseRef>) {
          os << "response:" << l.index;
        } else if constexpr (std::is_same_v<T, MultiLabel>) {
          os << "acts:{";
          bool first = true;
          for (std::size_t i = 0; i < l.bits.size(); ++i) {
            if (!l.bits[i]) continue;
            os << (first ? "" : ",") << i;
            first = false;
          }
          os << "}";
        } else {
          os << "state:[";
          for (std::size_t i = 0; i < l.values.size(); ++i) {
            os << (i ? "," : "") << l.values[i];
          }
          os << "]";
        }
        return os.str();
      },
      label);
}

void validate_label(const Ontology& ontology, const LabelValue& label) {
  auto fail = [](const std::string& what) { throw SchemaError(what); };
  switch (ontology.task) {
    case TaskKind::kIntent: {
      const auto* l = std::get_if<SingleClass>(&label);
      if (!l) fail("intent task expects a single class label");
      if (l->index < 0 ||
          l->index >= static_cast<int>(ontology.classes.size())) {
        fail("intent label " + std::to_string(l->index) + " outside ontology");
      }
      break;
    }
    case TaskKind::kResponseSelection: {
      const auto* l = std::get_if<ResponseRef>(&label);
      if (!l) fail("response selection expects a response index");
      if (l->index < 0 ||
          l->index >= static_cast<int>(ontology.responses.size())) {
        fail("response index " + std::to_string(l->index) +
             " outside candidate pool");
      }
      break;
    }
    case TaskKind::kDialogAct: {
      const auto* l = std::get_if<MultiLabel>(&label);
      if (!l) fail("dialog-act task expects a multi-label");
      if (l->bits.size() != ontology.da_intents.size()) {
        fail("dialog-act label width does not match ontology");
      }
      break;
    }
    case TaskKind::kDialogState: {
      const auto* l = std::get_if<SlotAssignment>(&label);
      if (!l) fail("dialog-state task expects a slot assignment");
      if (l->values.size() != ontology.slots.size()) {
        fail("dialog-state label does not cover every slot pair");
      }
      for (std::size_t p = 0; p < l->values.size(); ++p) {
        const int v = l->values[p];
        if (v < 0 || v >= static_cast<int>(ontology.slots[p].values.size())) {
          fail("value " + std::to_string(v) + " outside ontology of pair " +
               std::to_string(p));
        }
      }
      break;
    }
  }
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  flush();
  return out;
}

Tokens encode_turns(const Vocab& vocab, std::span<const std::string> turns,
                    std::size_t max_tokens) {
  Tokens out;
  for (std::size_t t = 0; t < turns.size(); ++t) {
    if (t > 0) out.push_back(Vocab::kSep);
    for (const auto& tok : tokenize(turns[t])) out.push_back(vocab.id(tok));
  }
  if (max_tokens > 0 && out.size() > max_tokens) {
    out.erase(out.begin(), out.end() - static_cast<std::ptrdiff_t>(max_tokens));
  }
  return out;
}

Ontology parse_ontology(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("ontology: ") + e.what());
  }
  Ontology o;
  o.task = parse_task_kind(j.at("task").get<std::string>());
  o.classes = j.value("classes", std::vector<std::string>{});
  if (j.contains("out_of_scope_class") && !j["out_of_scope_class"].is_null()) {
    o.out_of_scope_class = j["out_of_scope_class"].get<int>();
  }
  o.da_intents = j.value("da_intents", std::vector<std::string>{});
  o.responses = j.value("responses", std::vector<std::string>{});
  for (const auto& s : j.value("slots", json::array())) {
    SlotOntology slot;
    slot.domain = s.at("domain").get<std::string>();
    slot.slot = s.at("slot").get<std::string>();
    slot.values = s.at("values").get<std::vector<std::string>>();
    auto it = std::find(slot.values.begin(), slot.values.end(), "none");
    if (it == slot.values.end()) {
      slot.values.push_back("none");
      it = slot.values.end() - 1;
    }
    slot.none_index = static_cast<int>(it - slot.values.begin());
    o.slots.push_back(std::move(slot));
  }
  switch (o.task) {
    case TaskKind::kIntent:
      if (o.classes.size() < 2) throw SchemaError("intent needs >= 2 classes");
      if (o.out_of_scope_class &&
          (*o.out_of_scope_class < 0 ||
           *o.out_of_scope_class >= static_cast<int>(o.classes.size()))) {
        throw SchemaError("out_of_scope_class outside class list");
      }
      break;
    case TaskKind::kDialogAct:
      if (o.da_intents.empty()) throw SchemaError("no dialog-act intents");
      break;
    case TaskKind::kDialogState:
      if (o.slots.empty()) throw SchemaError("no slot pairs");
      break;
    case TaskKind::kResponseSelection:
      if (o.responses.size() < 2) throw SchemaError("response pool too small");
      break;
  }
  return o;
}

Ontology load_ontology(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open ontology " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_ontology(buf.str());
}

std::string ontology_to_json(const Ontology& o) {
  json j;
  j["task"] = task_kind_name(o.task);
  j["classes"] = o.classes;
  j["out_of_scope_class"] =
      o.out_of_scope_class ? json(*o.out_of_scope_class) : json(nullptr);
  j["da_intents"] = o.da_intents;
  j["responses"] = o.responses;
  j["slots"] = json::array();
  for (const auto& s : o.slots) {
    j["slots"].push_back(
        {{"domain", s.domain}, {"slot", s.slot}, {"values", s.values}});
  }
  return j.dump(2);
}

void save_ontology(const Ontology& ontology,
                   const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  out << ontology_to_json(ontology) << "\n";
}

Dataset load_jsonl(std::istream& corpus, const Ontology& ontology,
                   const LoadOptions& options) {
  std::vector<Record> records;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(corpus, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Record r;
    try {
      r = parse_record(ontology, line);
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const SchemaError& e) {
      throw SchemaError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const json::exception& e) {
      throw SchemaError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen.insert(r.id).second) {
      throw SchemaError("line " + std::to_string(line_no) + ": duplicate id '" +
                        r.id + "'");
    }
    if (r.split != SplitKind::kTrain && !r.label) {
      throw SchemaError("line " + std::to_string(line_no) +
                        ": validation/test records must be labeled");
    }
    records.push_back(std::move(r));
  }

  Dataset ds;
  ds.ontology = ontology;
  for (const auto& r : records) {
    if (r.split != SplitKind::kTrain) continue;
    for (const auto& turn : r.turns) {
      for (const auto& tok : tokenize(turn)) ds.vocab.add(tok);
    }
  }
  for (const auto& slot : ontology.slots) {
    for (const auto& v : slot.values) {
      for (const auto& tok : tokenize(v)) ds.vocab.add(tok);
    }
  }
  for (const auto& resp : ontology.responses) {
    for (const auto& tok : tokenize(resp)) ds.vocab.add(tok);
  }

  for (const auto& slot : ontology.slots) {
    std::vector<Tokens> values;
    for (const auto& v : slot.values) {
      Tokens t = encode_turns(ds.vocab, std::span(&v, 1), options.max_tokens);
      if (t.empty()) throw SchemaError("empty slot value in ontology");
      values.push_back(std::move(t));
    }
    ds.slot_value_tokens.push_back(std::move(values));
  }
  for (const auto& resp : ontology.responses) {
    Tokens t = encode_turns(ds.vocab, std::span(&resp, 1), options.max_tokens);
    if (t.empty()) throw SchemaError("empty response in candidate pool");
    ds.response_tokens.push_back(std::move(t));
  }

  for (auto& r : records) {
    Example ex;
    ex.id = std::move(r.id);
    ex.turns = std::move(r.turns);
    ex.dialog = r.dialog;
    ex.tokens = encode_turns(ds.vocab, ex.turns, options.max_tokens);
    if (ex.tokens.empty()) {
      throw SchemaError("record '" + ex.id + "' has no tokens");
    }
    ex.label = std::move(r.label);
    ex.split = r.split;
    switch (ex.split) {
      case SplitKind::kTrain:
        ds.train.push_back(std::move(ex));
        break;
      case SplitKind::kValidation:
        ds.validation.push_back(std::move(ex));
        break;
      case SplitKind::kTest:
        ds.test.push_back(std::move(ex));
        break;
    }
  }
  return ds;
}

Dataset load_jsonl(const std::filesystem::path& corpus,
                   const std::filesystem::path& ontology,
                   const LoadOptions& options) {
  std::ifstream in(corpus);
  if (!in) throw ParseError("cannot open corpus " + corpus.string());
  return load_jsonl(in, load_ontology(ontology), options);
}

void save_jsonl(const Dataset& dataset, std::ostream& out) {
  for (const auto* split : {&dataset.train, &dataset.validation,
                            &dataset.test}) {
    for (const auto& ex : *split) {
      json j;
      j["id"] = ex.id;
      if (ex.dialog) {
        j["turns"] = ex.turns;
      } else {
        j["text"] = ex.turns.empty() ? std::string() : ex.turns.front();
      }
      j["label"] = ex.label ? label_to_json(dataset.ontology, *ex.label)
                            : json(nullptr);
      j["split"] = split_name(ex.split);
      out << j.dump() << "\n";
    }
  }
}

void save_jsonl(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path.string());
  save_jsonl(dataset, out);
}

void SealedLabels::seal(const std::string& id, LabelValue label) {
  labels_.insert_or_assign(id, std::move(label));
}

const LabelValue* SealedLabels::lookup(const std::string& id) const {
  auto it = labels_.find(id);
  return it == labels_.end() ? nullptr : &it->second;
}

FewShotSplit few_shot_split(const Dataset& dataset, double fraction,
                            std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw SplitError("labeled fraction must lie in (0, 1]");
  }
  std::vector<std::size_t> labeled_idx;
  for (std::size_t i = 0; i < dataset.train.size(); ++i) {
    if (dataset.train[i].label) labeled_idx.push_back(i);
  }
  if (labeled_idx.empty()) throw SplitError("no labeled training examples");

  const auto target = std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::floor(fraction * static_cast<double>(labeled_idx.size()) +
                        0.5)));

  Rng rng = Rng(seed).child("few_shot_split");
  std::vector<std::size_t> order = labeled_idx;
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }

  std::vector<char> chosen(dataset.train.size(), 0);
  if (dataset.ontology.task == TaskKind::kIntent) {
    // Stratified: class c gets a share of target proportional to its size,
    // at least one, remainders handed out largest first.
    std::map<int, std::vector<std::size_t>> by_class;
    for (auto i : order) {
      by_class[std::get<SingleClass>(*dataset.train[i].label).index].push_back(
          i);
    }
    if (target < by_class.size()) {
      throw SplitError("labeled fraction yields " + std::to_string(target) +
                       " examples but " + std::to_string(by_class.size()) +
                       " classes need one each");
    }
    const double total = static_cast<double>(labeled_idx.size());
    struct Share {
      int cls;
      std::size_t quota;
      double remainder;
      std::size_t available;
    };
    std::vector<Share> shares;
    std::size_t assigned = 0;
    for (const auto& [c, members] : by_class) {
      const double exact = static_cast<double>(target) *
                           static_cast<double>(members.size()) / total;
      const std::size_t base =
          std::max<std::size_t>(1, static_cast<std::size_t>(exact));
      shares.push_back({c, base, exact - static_cast<double>(base),
                        members.size()});
      assigned += base;
    }
    std::vector<std::size_t> rank(shares.size());
    for (std::size_t i = 0; i < rank.size(); ++i) rank[i] = i;
    std::stable_sort(rank.begin(), rank.end(), [&](std::size_t x, std::size_t y) {
      return shares[x].remainder > shares[y].remainder;
    });
    // The floor of one per class can overshoot; trim from the largest
    // quotas, smallest remainders first.
    while (assigned > target) {
      std::size_t pick = rank.size();
      for (auto it = rank.rbegin(); it != rank.rend(); ++it) {
        if (shares[*it].quota > 1 &&
            (pick == rank.size() || shares[*it].quota > shares[pick].quota)) {
          pick = *it;
        }
      }
      --shares[pick].quota;
      --assigned;
    }
    while (assigned < target) {
      bool progressed = false;
      for (auto r : rank) {
        if (assigned >= target) break;
        if (shares[r].quota < shares[r].available) {
          ++shares[r].quota;
          ++assigned;
          progressed = true;
        }
      }
      if (!progressed) break;
    }
    for (const auto& sh : shares) {
      const auto& members = by_class[sh.cls];
      for (std::size_t j = 0; j < sh.quota; ++j) chosen[members[j]] = 1;
    }
  } else {
    for (std::size_t j = 0; j < target; ++j) chosen[order[j]] = 1;
  }

  FewShotSplit split;
  for (std::size_t i = 0; i < dataset.train.size(); ++i) {
    const Example& ex = dataset.train[i];
    if (chosen[i]) {
      split.labeled.push_back(ex);
    } else {
      Example stripped = ex;
      if (stripped.label) split.sealed.seal(ex.id, *stripped.label);
      stripped.label.reset();
      split.unlabeled.push_back(std::move(stripped));
    }
  }
  return split;
}

}  // namespace gradst
