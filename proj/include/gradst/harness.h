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

#ifndef GRADST_HARNESS_H_
#define GRADST_HARNESS_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gradst/corpus.h"
#include "gradst/mlm.h"
#include "gradst/selftrain.h"
#include "gradst/synth.h"
#include "json.hpp"

namespace gradst {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Variant {
  kFull,
  kNoSmoothSaliency,
  kNoAugmentation,
  kNoPseudoLabeling,
  kBaseline,
  kRandomMasking,
};

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);

struct DatasetSource {
  // Either a synthetic corpus or a JSONL corpus with its ontology file.
  std::optional<SynthSpec> synthetic;
  std::filesystem::path corpus;
  std::filesystem::path ontology;
  LoadOptions load;
};

struct ExperimentConfig {
  DatasetSource dataset;
  double labeled_fraction = 0.01;
  STConfig st;
  MlmTrainOptions mlm;
  std::vector<std::uint64_t> seeds = {0};
  std::vector<Variant> variants = {Variant::kFull};
  std::vector<SelectorKind> selectors = {SelectorKind::kTopK};
  std::filesystem::path output_dir;
  // Write per-seed reports and checkpoints (aggregate files are always
  // written when output_dir is set).
  bool write_artifacts = true;
  std::size_t workers = 1;
};

// Relative dataset paths are resolved against `base_dir`.
ExperimentConfig parse_experiment_config(
    const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
void validate(const ExperimentConfig& config);

Dataset load_dataset(const DatasetSource& source);

// STConfig for one result row.
STConfig variant_config(const STConfig& base, Variant variant,
                        SelectorKind selector);

struct SeedOutcome {
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  std::map<std::string, double> test;
  double validation_metric = 0.0;
  // Test primary metric of the warm-up teacher for the same seed.
  double baseline_primary = 0.0;
  std::size_t iterations = 0;
  std::optional<double> first_iteration_precision;
  std::string stop_reason;
  nlohmann::json report;
  double wall_ms = 0.0;
};

struct ResultRow {
  std::string name;
  Variant variant = Variant::kFull;
  std::optional<SelectorKind> selector;
  std::vector<SeedOutcome> seeds;

  // Over successful seeds; std only with two or more.
  std::map<std::string, double> mean;
  std::map<std::string, double> stddev;
  double mean_improvement = 0.0;
  std::optional<double> mean_first_precision;
};

struct ExperimentResult {
  std::string primary_metric;
  std::vector<ResultRow> rows;
  std::vector<std::string> errors;

  bool all_ok() const;
  nlohmann::json aggregate_json() const;
  nlohmann::json timing_json() const;
  void write_csv(std::ostream& out) const;
};

struct PreparedSeed {
  std::uint64_t seed = 0;
  FewShotSplit split;
  MlmModel mlm;
  FitResult warmup;
};

// Split, MLM pre-training and the warm-up teacher for one seed.
PreparedSeed prepare_seed(const Dataset& dataset, const ModelBlueprint& bp,
                          const ExperimentConfig& config, std::uint64_t seed);

ExperimentResult run_experiment(const ExperimentConfig& config);
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const Dataset& dataset);

}  // namespace gradst

#endif  // GRADST_HARNESS_H_
