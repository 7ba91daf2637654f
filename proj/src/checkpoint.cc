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

#include "gradst/checkpoint.h"

#include <fstream>
#include <string>
#include <vector>

namespace gradst {

namespace {

constexpr const char* kFormat = "gradst-checkpoint";
constexpr int kVersion = 1;

using nlohmann::json;

json mat_json(const Mat& m) {
  return {{"rows", m.rows()},
          {"cols", m.cols()},
          {"data", std::vector<double>(m.flat().begin(), m.flat().end())}};
}

Mat mat_from(const json& j) {
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  auto data = j.at("data").get<Vec>();
  if (data.size() != rows * cols) {
    throw CheckpointError("checkpoint matrix has wrong element count");
  }
  return Mat(rows, cols, std::move(data));
}

json header(const char* kind, std::uint64_t seed) {
  return {{"format", kFormat}, {"version", kVersion}, {"kind", kind},
          {"seed", seed}};
}

void check_header(const json& doc, const char* kind) {
  if (!doc.is_object() || doc.value("format", "") != kFormat) {
    throw CheckpointError("not a gradst checkpoint");
  }
  if (doc.value("version", 0) != kVersion) {
    throw CheckpointError("unsupported checkpoint version");
  }
  if (doc.value("kind", "") != kind) {
    throw CheckpointError(std::string("checkpoint kind is not ") + kind);
  }
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

void write_json(const json& doc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out << doc.dump() << '\n';
}

}  // namespace

json checkpoint_json(const TaskModel& model, std::uint64_t seed) {
  json doc = header("task_model", seed);
  doc["task"] = task_kind_name(model.task);
  doc["similarity_scale"] = model.similarity_scale;
  doc["encoder"] = {{"embeddings", mat_json(model.encoder.embeddings)},
                    {"weight", mat_json(model.encoder.weight)},
                    {"bias", model.encoder.bias},
                    {"dropout_rate", model.encoder.dropout_rate}};
  json head;
  if (const auto* h = std::get_if<IntentHead>(&model.head)) {
    head["weight"] = mat_json(h->weight);
  } else if (const auto* h = std::get_if<DialogActHead>(&model.head)) {
    head["weight"] = mat_json(h->weight);
  } else if (const auto* h = std::get_if<DialogStateHead>(&model.head)) {
    head["projections"] = json::array();
    for (const auto& p : h->projections) head["projections"].push_back(mat_json(p));
    head["values"] = h->values;
  } else if (const auto* h = std::get_if<ResponseHead>(&model.head)) {
    head["pool"] = h->pool;
    head["train_negatives"] = h->train_negatives;
    head["eval_negatives"] = h->eval_negatives;
  }
  doc["head"] = std::move(head);
  return doc;
}

TaskModel task_model_from_json(const json& doc) {
  check_header(doc, "task_model");
  try {
    TaskModel m;
    m.task = parse_task_kind(doc.at("task").get<std::string>());
    m.similarity_scale = doc.at("similarity_scale").get<double>();
    const auto& enc = doc.at("encoder");
    m.encoder.embeddings = mat_from(enc.at("embeddings"));
    m.encoder.weight = mat_from(enc.at("weight"));
    m.encoder.bias = enc.at("bias").get<Vec>();
    m.encoder.dropout_rate = enc.at("dropout_rate").get<double>();
    const auto& head = doc.at("head");
    switch (m.task) {
      case TaskKind::kIntent:
        m.head = IntentHead{mat_from(head.at("weight"))};
        break;
      case TaskKind::kDialogAct:
        m.head = DialogActHead{mat_from(head.at("weight"))};
        break;
      case TaskKind::kDialogState: {
        DialogStateHead h;
        for (const auto& p : head.at("projections")) {
          h.projections.push_back(mat_from(p));
        }
        h.values = head.at("values").get<std::vector<std::vector<Tokens>>>();
        m.head = std::move(h);
        break;
      }
      case TaskKind::kResponseSelection: {
        ResponseHead h;
        h.pool = head.at("pool").get<std::vector<Tokens>>();
        h.train_negatives = head.at("train_negatives").get<std::size_t>();
        h.eval_negatives = head.at("eval_negatives").get<std::size_t>();
        m.head = std::move(h);
        break;
      }
    }
    return m;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

json checkpoint_json(const MlmModel& model, std::uint64_t seed) {
  json doc = header("mlm", seed);
  doc["embeddings"] = mat_json(model.embeddings);
  doc["output"] = mat_json(model.output);
  doc["bias"] = model.bias;
  doc["window"] = model.window;
  return doc;
}

MlmModel mlm_model_from_json(const json& doc) {
  check_header(doc, "mlm");
  try {
    MlmModel m;
    m.embeddings = mat_from(doc.at("embeddings"));
    m.output = mat_from(doc.at("output"));
    m.bias = doc.at("bias").get<Vec>();
    m.window = doc.at("window").get<std::size_t>();
    return m;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const TaskModel& model, std::uint64_t seed,
                     const std::filesystem::path& path) {
  write_json(checkpoint_json(model, seed), path);
}

void save_checkpoint(const MlmModel& model, std::uint64_t seed,
                     const std::filesystem::path& path) {
  write_json(checkpoint_json(model, seed), path);
}

TaskModel load_task_model(const std::filesystem::path& path) {
  return task_model_from_json(read_json(path));
}

MlmModel load_mlm_model(const std::filesystem::path& path) {
  return mlm_model_from_json(read_json(path));
}

}  // namespace gradst
