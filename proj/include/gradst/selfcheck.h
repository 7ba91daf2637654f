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

#ifndef GRADST_SELFCHECK_H_
#define GRADST_SELFCHECK_H_

#include <cstdint>
#include <string>
#include <vector>

#include "gradst/heads.h"
#include "gradst/rng.h"

namespace gradst {

// A small randomly initialised model for `task` with a random ontology
// over `vocab_size` tokens, and a random valid label for it.
TaskModel make_probe_model(TaskKind task, std::size_t vocab_size,
                           std::size_t embed_dim, std::size_t hidden_dim,
                           Rng& rng);
LabelValue random_label(const TaskModel& model, Rng& rng);

struct CheckResult {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double tolerance = 0.0;
};

// Gradient, saliency and masking-distribution checks run by `gradst check`.
std::vector<CheckResult> run_self_checks(std::uint64_t seed);

}  // namespace gradst

#endif  // GRADST_SELFCHECK_H_
