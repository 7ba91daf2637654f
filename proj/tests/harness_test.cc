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

#include "gradst/harness.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gradst/checkpoint.h"
#include "gradst/selfcheck.h"
#include "gtest/gtest.h"

namespace gradst {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gradst_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TEST(CheckpointTest, TaskModelRoundTrip) {
  Rng rng(3);
  for (TaskKind task : {TaskKind::kIntent, TaskKind::kDialogAct,
                        TaskKind::kDialogState, TaskKind::kResponseSelection}) {
    const TaskModel m = make_probe_model(task, 20, 5, 4, rng);
    const auto doc = checkpoint_json(m, 77);
    EXPECT_EQ(doc.at("format"), "gradst-checkpoint");
    EXPECT_EQ(doc.at("kind"), "task_model");
    EXPECT_EQ(doc.at("seed"), 77);
    EXPECT_EQ(task_model_from_json(nlohmann::json::parse(doc.dump())), m);
  }
}

TEST(CheckpointTest, MlmRoundTripAndFiles) {
  const MlmModel m = init_mlm(30, 6, 2, 5);
  const fs::path dir = scratch("ckpt");
  save_checkpoint(m, 5, dir / "mlm.json");
  EXPECT_EQ(load_mlm_model(dir / "mlm.json"), m);
  Rng rng(1);
  const TaskModel t = make_probe_model(TaskKind::kIntent, 20, 5, 4, rng);
  save_checkpoint(t, 1, dir / "task.json");
  EXPECT_EQ(load_task_model(dir / "task.json"), t);
  EXPECT_THROW(load_task_model(dir / "mlm.json"), CheckpointError);
  EXPECT_THROW(load_mlm_model(dir / "missing.json"), CheckpointError);
  fs::remove_all(dir);
}

TEST(CheckpointTest, RejectsMalformedDocuments) {
  const MlmModel m = init_mlm(30, 6, 2, 5);
  auto doc = checkpoint_json(m, 1);
  doc["format"] = "something-else";
  EXPECT_THROW(mlm_model_from_json(doc), CheckpointError);
  doc = checkpoint_json(m, 1);
  doc["version"] = 99;
  EXPECT_THROW(mlm_model_from_json(doc), CheckpointError);
  doc = checkpoint_json(m, 1);
  doc["embeddings"]["rows"] = 3;
  EXPECT_THROW(mlm_model_from_json(doc), CheckpointError);
}

TEST(ConfigTest, ParsesAllSections) {
  const auto doc = nlohmann::json::parse(R"({
    "dataset": {"synthetic": {"num_classes": 5, "vocab_size": 80,
                              "keywords_per_class": 3, "size": 300}},
    "labeled_fraction": 0.1,
    "st": {"k": 7, "outer_patience": 2, "learning_rate": 0.2,
           "pretrained_embedding_rms": 0.0},
    "gradaug": {"q": 2, "beta": 0.5, "m": 4, "mode": "vanilla"},
    "mlm": {"epochs": 3, "dim": 16},
    "seeds": [4, 5],
    "variants": ["st", "baseline", "wo_augmentation"],
    "selectors": ["top_k", "least_k"],
    "workers": 2
  })");
  const ExperimentConfig c = parse_experiment_config(doc);
  ASSERT_TRUE(c.dataset.synthetic.has_value());
  EXPECT_EQ(c.dataset.synthetic->num_classes, 5u);
  EXPECT_EQ(c.labeled_fraction, 0.1);
  EXPECT_EQ(c.st.k, 7u);
  EXPECT_EQ(c.st.outer_patience, 2u);
  EXPECT_EQ(c.st.pretrained_embedding_rms, 0.0);
  EXPECT_EQ(c.st.gradaug.q, 2u);
  EXPECT_EQ(c.st.gradaug.noise_count, 4u);
  EXPECT_EQ(c.st.gradaug.mode, MaskingMode::kVanillaSaliency);
  EXPECT_EQ(c.mlm.epochs, 3u);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{4, 5}));
  EXPECT_EQ(c.variants.size(), 3u);
  EXPECT_EQ(c.selectors.back(), SelectorKind::kLeastK);
  EXPECT_EQ(c.workers, 2u);
}

TEST(ConfigTest, Rejections) {
  auto parse = [](const char* text) {
    return parse_experiment_config(nlohmann::json::parse(text));
  };
  EXPECT_THROW(parse(R"({"seeds": [1]})"), ConfigError);
  EXPECT_THROW(parse(R"({"dataset": {"synthetic": {}}, "sedes": [1]})"),
               ConfigError);
  EXPECT_THROW(parse(R"({"dataset": {"synthetic": {}}, "st": {"kk": 1}})"),
               ConfigError);
  EXPECT_THROW(parse(R"({"dataset": {"synthetic": {}}, "seeds": []})"),
               ConfigError);
  EXPECT_THROW(
      parse(R"({"dataset": {"synthetic": {}}, "labeled_fraction": 0})"),
      ConfigError);
  EXPECT_THROW(parse(R"({"dataset": {"synthetic": {}}, "variants": ["x"]})"),
               ConfigError);
  EXPECT_THROW(parse(R"({"dataset": {"synthetic": {}}, "st": {"k": "ten"}})"),
               ConfigError);
  EXPECT_THROW(load_experiment_config("/nonexistent/config.json"),
               ConfigError);
}

TEST(ConfigTest, RelativeCorpusPaths) {
  const auto c = parse_experiment_config(
      nlohmann::json::parse(
          R"({"dataset": {"corpus": "c.jsonl", "ontology": "o.json"}})"),
      "/data/run");
  EXPECT_EQ(c.dataset.corpus, fs::path("/data/run/c.jsonl"));
  EXPECT_EQ(c.dataset.ontology, fs::path("/data/run/o.json"));
}

TEST(VariantTest, ConfigSwitches) {
  const STConfig base;
  EXPECT_FALSE(variant_config(base, Variant::kNoAugmentation,
                              SelectorKind::kTopK)
                   .use_augmentation);
  EXPECT_FALSE(variant_config(base, Variant::kNoPseudoLabeling,
                              SelectorKind::kTopK)
                   .use_pseudo_labeling);
  EXPECT_EQ(variant_config(base, Variant::kNoSmoothSaliency,
                           SelectorKind::kTopK)
                .gradaug.mode,
            MaskingMode::kVanillaSaliency);
  EXPECT_EQ(variant_config(base, Variant::kRandomMasking, SelectorKind::kTopK)
                .gradaug.mode,
            MaskingMode::kRandom);
  EXPECT_EQ(variant_config(base, Variant::kFull, SelectorKind::kLeastK)
                .selector,
            SelectorKind::kLeastK);
  for (Variant v : {Variant::kFull, Variant::kBaseline,
                    Variant::kNoSmoothSaliency, Variant::kRandomMasking,
                    Variant::kNoAugmentation, Variant::kNoPseudoLabeling}) {
    EXPECT_EQ(parse_variant(variant_name(v)), v);
  }
}

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  SynthSpec s;
  s.num_classes = 4;
  s.vocab_size = 60;
  s.keywords_per_class = 3;
  s.keyword_slots = 2;
  s.size = 300;
  s.seed = 2;
  c.dataset.synthetic = s;
  c.labeled_fraction = 0.05;
  c.st.k = 30;
  c.st.max_iterations = 2;
  c.st.warmup_max_epochs = 20;
  c.st.student_max_epochs = 5;
  c.st.shape.embed_dim = 8;
  c.st.shape.hidden_dim = 8;
  c.mlm.dim = 8;
  c.mlm.epochs = 1;
  return c;
}

TEST(ExperimentTest, VariantSuiteRows) {
  ExperimentConfig c = tiny_config();
  c.seeds = {1, 2, 3};
  c.variants = {Variant::kFull, Variant::kNoSmoothSaliency,
                Variant::kNoAugmentation, Variant::kNoPseudoLabeling,
                Variant::kBaseline};
  c.output_dir = scratch("variants");
  const ExperimentResult r = run_experiment(c);
  EXPECT_TRUE(r.all_ok());
  ASSERT_EQ(r.rows.size(), 5u);
  EXPECT_EQ(r.primary_metric, "acc_all");
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.seeds.size(), 3u);
    for (const auto& [name, v] : row.mean) {
      EXPECT_GE(v, 0.0) << name;
      EXPECT_LE(v, 1.0) << name;
    }
    EXPECT_TRUE(row.stddev.count("acc_all"));
  }
  EXPECT_EQ(r.rows.back().name, "baseline");
  EXPECT_DOUBLE_EQ(r.rows.back().mean_improvement, 0.0);
  for (const char* f : {"aggregate.json", "timing.json", "results.csv",
                        "seed_1/mlm.ckpt.json", "seed_2/warmup.ckpt.json",
                        "seed_3/st_top_k.report.json",
                        "seed_3/st_top_k.best.ckpt.json"}) {
    EXPECT_TRUE(fs::exists(c.output_dir / f)) << f;
  }
  std::ifstream csv(c.output_dir / "results.csv");
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "row,variant,selector,seed,status,metric,value");
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    rows += line.rfind("baseline,baseline,,mean,,acc_all,", 0) == 0;
  }
  EXPECT_EQ(rows, 1u);
  fs::remove_all(c.output_dir);
}

TEST(ExperimentTest, SelectorSuiteAndSingleSeedStd) {
  ExperimentConfig c = tiny_config();
  c.seeds = {4};
  c.selectors = {SelectorKind::kTopK, SelectorKind::kRandomK,
                 SelectorKind::kLeastK, SelectorKind::kSelectAll};
  const ExperimentResult r = run_experiment(c);
  ASSERT_EQ(r.rows.size(), 4u);
  EXPECT_EQ(r.rows[3].name, "st/select_all");
  for (const auto& row : r.rows) {
    EXPECT_TRUE(row.stddev.empty());
    EXPECT_TRUE(row.mean_first_precision.has_value());
  }
}

TEST(ExperimentTest, AggregateIsReproducible) {
  ExperimentConfig c = tiny_config();
  c.seeds = {1, 2};
  c.variants = {Variant::kFull, Variant::kBaseline};
  c.workers = 2;
  const auto a = run_experiment(c).aggregate_json().dump();
  c.workers = 1;
  const auto b = run_experiment(c).aggregate_json().dump();
  EXPECT_EQ(a, b);
}

TEST(ExperimentTest, FailingSeedDoesNotAbortSiblings) {
  ExperimentConfig c = tiny_config();
  c.seeds = {1};
  Dataset d = load_dataset(c.dataset);
  // A validation set the model cannot score makes every run fail.
  d.validation.clear();
  const ExperimentResult r = run_experiment(c, d);
  EXPECT_FALSE(r.all_ok());
  EXPECT_FALSE(r.errors.empty());
  EXPECT_FALSE(r.rows[0].seeds[0].ok);
}

}  // namespace
}  // namespace gradst
