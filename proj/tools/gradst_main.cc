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

// Command-line front end: run experiments, dump augmentations, run the
// self-checks and write synthetic corpora.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gradst/corpus.h"
#include "gradst/gradaug.h"
#include "gradst/harness.h"
#include "gradst/parallel.h"
#include "gradst/selfcheck.h"
#include "gradst/synth.h"

namespace {

using namespace gradst;

int cmd_run(const std::string& config_path,
            const std::vector<std::string>& variants,
            const std::vector<std::string>& selectors, const std::string& out,
            std::size_t workers) {
  ExperimentConfig config = load_experiment_config(config_path);
  if (!variants.empty()) {
    config.variants.clear();
    for (const auto& v : variants) config.variants.push_back(parse_variant(v));
  }
  if (!selectors.empty()) {
    config.selectors.clear();
    for (const auto& s : selectors) config.selectors.push_back(parse_selector(s));
  }
  if (!out.empty()) config.output_dir = out;
  if (workers > 0) config.workers = workers;
  validate(config);

  const ExperimentResult result = run_experiment(config);
  std::printf("%-34s %10s %10s %12s\n", "row", "mean", "std", "vs baseline");
  for (const auto& row : result.rows) {
    const auto mean = row.mean.find(result.primary_metric);
    const auto sd = row.stddev.find(result.primary_metric);
    std::printf("%-34s %10s %10s %+12.4f\n", row.name.c_str(),
                mean == row.mean.end()
                    ? "n/a"
                    : std::to_string(mean->second).c_str(),
                sd == row.stddev.end() ? "-"
                                       : std::to_string(sd->second).c_str(),
                row.mean_improvement);
    for (const auto& s : row.seeds) {
      if (!s.ok) {
        std::fprintf(stderr, "%s seed %llu failed: %s\n", row.name.c_str(),
                     static_cast<unsigned long long>(s.seed), s.error.c_str());
      }
    }
  }
  for (const auto& e : result.errors) std::fprintf(stderr, "%s\n", e.c_str());
  if (!config.output_dir.empty()) {
    std::printf("reports written to %s\n", config.output_dir.c_str());
  }
  return result.all_ok() ? 0 : 1;
}

int cmd_augment(const std::string& config_path, std::optional<std::uint64_t> seed,
                const std::string& out) {
  const ExperimentConfig config = load_experiment_config(config_path);
  const Dataset dataset = load_dataset(config.dataset);
  const ModelBlueprint bp = blueprint_from(dataset);
  const std::uint64_t s = seed.value_or(config.seeds.front());
  const PreparedSeed prep = prepare_seed(dataset, bp, config, s);
  GradAugConfig g = config.st.gradaug;
  const GradAugResult aug =
      gradaug(prep.split.labeled, prep.warmup.model, prep.mlm, g, s,
              config.workers);
  if (out.empty()) {
    write_augmentation_dump(aug, &dataset.vocab, std::cout);
  } else {
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write " + out);
    write_augmentation_dump(aug, &dataset.vocab, f);
  }
  for (const auto& f : aug.failures) std::fprintf(stderr, "skipped %s\n", f.c_str());
  return 0;
}

int cmd_check(std::uint64_t seed) {
  bool ok = true;
  for (const auto& c : run_self_checks(seed)) {
    std::printf("%-4s %-32s %.3e (tolerance %.0e)\n", c.pass ? "ok" : "FAIL",
                c.name.c_str(), c.value, c.tolerance);
    ok = ok && c.pass;
  }
  return ok ? 0 : 1;
}

int cmd_synth(const SynthSpec& spec, const std::string& corpus,
              const std::string& ontology) {
  const Dataset d = synth_generate(spec);
  save_jsonl(d, corpus);
  save_ontology(d.ontology, ontology);
  std::printf("%zu train, %zu validation, %zu test, %zu tokens\n", d.train.size(),
              d.validation.size(), d.test.size(), d.vocab.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gradst: self-training with gradient-guided augmentation"};
  app.require_subcommand(1);

  std::string config, out;
  std::vector<std::string> variants, selectors;
  std::size_t workers = 0;
  auto* run = app.add_subcommand("run", "Run an experiment from a config file");
  run->add_option("--config", config, "Experiment config (JSON)")->required();
  run->add_option("--variant", variants, "Restrict to these variants");
  run->add_option("--selector", selectors, "Restrict to these selectors");
  run->add_option("--out", out, "Output directory");
  run->add_option("--workers", workers, "Worker threads (default: GRADST_WORKERS)");

  std::optional<std::uint64_t> aug_seed;
  std::string aug_out;
  auto* augment = app.add_subcommand("augment", "Write the GradAug dump for L");
  augment->add_option("--config", config, "Experiment config (JSON)")->required();
  augment->add_option("--seed", aug_seed, "Seed (default: first config seed)");
  augment->add_option("--out", aug_out, "Output JSONL (default: stdout)");

  std::uint64_t check_seed = 0;
  auto* check = app.add_subcommand("check", "Run the gradient and distribution self-checks");
  check->add_option("--seed", check_seed, "Seed");

  SynthSpec spec;
  std::string synth_corpus = "corpus.jsonl", synth_ontology = "ontology.json";
  auto* synth = app.add_subcommand("synth", "Write a synthetic intent corpus");
  synth->add_option("--classes", spec.num_classes, "Number of intents");
  synth->add_option("--vocab", spec.vocab_size, "Content words");
  synth->add_option("--size", spec.size, "Training examples");
  synth->add_option("--keywords", spec.keywords_per_class, "Keywords per class");
  synth->add_option("--slots", spec.keyword_slots, "Keyword slots per template");
  synth->add_option("--templates", spec.templates_per_class, "Templates per class");
  synth->add_option("--noise", spec.noise_rate, "Keyword noise rate");
  synth->add_option("--filler-noise", spec.filler_noise_rate, "Filler noise rate");
  synth->add_option("--shared-templates", spec.shared_templates,
                    "Use one template pool for all classes");
  synth->add_option("--seed", spec.seed, "Seed");
  synth->add_option("--corpus", synth_corpus, "Output corpus JSONL");
  synth->add_option("--ontology", synth_ontology, "Output ontology JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config, variants, selectors, out, workers);
    if (*augment) return cmd_augment(config, aug_seed, aug_out);
    if (*check) return cmd_check(check_seed);
    if (*synth) return cmd_synth(spec, synth_corpus, synth_ontology);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
