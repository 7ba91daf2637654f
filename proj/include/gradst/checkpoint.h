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

#ifndef GRADST_CHECKPOINT_H_
#define GRADST_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <stdexcept>

#include "gradst/heads.h"
#include "gradst/mlm.h"
#include "json.hpp"

namespace gradst {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Checkpoints are JSON documents; doubles are written with round-trip
// precision so that loading reproduces the parameters bit for bit.
nlohmann::json checkpoint_json(const TaskModel& model, std::uint64_t seed);
TaskModel task_model_from_json(const nlohmann::json& doc);

nlohmann::json checkpoint_json(const MlmModel& model, std::uint64_t seed);
MlmModel mlm_model_from_json(const nlohmann::json& doc);

void save_checkpoint(const TaskModel& model, std::uint64_t seed,
                     const std::filesystem::path& path);
void save_checkpoint(const MlmModel& model, std::uint64_t seed,
                     const std::filesystem::path& path);
TaskModel load_task_model(const std::filesystem::path& path);
MlmModel load_mlm_model(const std::filesystem::path& path);

}  // namespace gradst

#endif  // GRADST_CHECKPOINT_H_
