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

#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "gradst/checkpoint.h"
#include "gradst/evaluate.h"
#include "gradst/parallel.h"

namespace gradst {

namespace {

using nlohmann::json;

void check_keys(const json& obj, std::string_view where,
                std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) {
    throw ConfigError(std::string(where) + ": expected an object");
  }
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || a == key;
    if (!known) {
      throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

SynthSpec parse_synth(const json& j) {
  check_keys(j, "dataset.synthetic",
             {"num_classes", "vocab_size", "templates_per_class",
              "keywords_per_class", "keyword_slots", "noise_rate",
              "filler_noise_rate", "shared_templates", "size",
              "validation_size", "test_size", "seed"});
  SynthSpec s;
  read(j, "num_classes", s.num_classes);
  read(j, "vocab_size", s.vocab_size);
  read(j, "templates_per_class", s.templates_per_class);
  read(j, "keywords_per_class", s.keywords_per_class);
  read(j, "keyword_slots", s.keyword_slots);
  read(j, "noise_rate", s.noise_rate);
  read(j, "filler_noise_rate", s.filler_noise_rate);
  read(j, "shared_templates", s.shared_templates);
  read(j, "size", s.size);
  read(j, "validation_size", s.validation_size);
  read(j, "test_size", s.test_size);
  read(j, "seed", s.seed);
  return s;
}

void parse_gradaug(const json& j, GradAugConfig& g) {
  check_keys(j, "gradaug",
             {"q", "beta", "m", "noise_variance", "mask_ratio",
              "importance_floor", "top_k", "mode"});
  read(j, "q", g.q);
  read(j, "beta", g.beta);
  read(j, "m", g.noise_count);
  read(j, "noise_variance", g.noise_variance);
  read(j, "mask_ratio", g.mask_ratio);
  read(j, "importance_floor", g.importance_floor);
  read(j, "top_k", g.top_k);
  if (j.contains("mode")) {
    g.mode = parse_masking_mode(j.at("mode").get<std::string>());
  }
}

void parse_st(const json& j, STConfig& c) {
  check_keys(j, "st",
             {"k", "warmup_patience", "inner_patience", "outer_patience",
              "max_iterations", "warmup_max_epochs", "student_max_epochs",
              "learning_rate", "batch_size", "embed_dim", "hidden_dim",
              "dropout", "similarity_scale", "embed_init_scale",
              "pretrained_embedding_rms"});
  read(j, "k", c.k);
  read(j, "warmup_patience", c.warmup_patience);
  read(j, "inner_patience", c.inner_patience);
  read(j, "outer_patience", c.outer_patience);
  read(j, "max_iterations", c.max_iterations);
  read(j, "warmup_max_epochs", c.warmup_max_epochs);
  read(j, "student_max_epochs", c.student_max_epochs);
  read(j, "learning_rate", c.learning_rate);
  read(j, "batch_size", c.batch_size);
  read(j, "embed_dim", c.shape.embed_dim);
  read(j, "hidden_dim", c.shape.hidden_dim);
  read(j, "dropout", c.shape.dropout_rate);
  read(j, "similarity_scale", c.shape.similarity_scale);
  read(j, "embed_init_scale", c.shape.embed_init_scale);
  read(j, "pretrained_embedding_rms", c.pretrained_embedding_rms);
}

void parse_mlm(const json& j, MlmTrainOptions& m) {
  check_keys(j, "mlm",
             {"mask_ratio", "epochs", "dim", "window", "learning_rate",
              "heldout_fraction"});
  read(j, "mask_ratio", m.mask_ratio);
  read(j, "epochs", m.epochs);
  read(j, "dim", m.dim);
  read(j, "window", m.window);
  read(j, "learning_rate", m.learning_rate);
  read(j, "heldout_fraction", m.heldout_fraction);
}

std::uint64_t derive(std::uint64_t seed, std::string_view what) {
  Rng r = Rng(seed).child(what);
  return r();
}

std::string row_name(Variant v, std::optional<SelectorKind> s) {
  std::string name(variant_name(v));
  if (s) name += "/" + std::string(selector_name(*s));
  return name;
}

std::string file_stem(const std::string& row) {
  std::string out = row;
  for (auto& c : out) {
    if (c == '/') c = '_';
  }
  return out;
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - start)
      .count();
}

json metrics_json(const std::map<std::string, double>& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[k] = v;
  return j;
}

void aggregate(ResultRow& row, const std::string& primary) {
  std::map<std::string, std::vector<double>> values;
  std::vector<double> gains, precisions;
  for (const auto& s : row.seeds) {
    if (!s.ok) continue;
    for (const auto& [k, v] : s.test) values[k].push_back(v);
    auto it = s.test.find(primary);
    if (it != s.test.end()) gains.push_back(it->second - s.baseline_primary);
    if (s.first_iteration_precision) {
      precisions.push_back(*s.first_iteration_precision);
    }
  }
  auto mean_of = [](const std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
  };
  for (const auto& [k, v] : values) {
    const double mu = mean_of(v);
    row.mean[k] = mu;
    if (v.size() >= 2) {
      double ss = 0.0;
      for (double x : v) ss += (x - mu) * (x - mu);
      row.stddev[k] = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
  }
  if (!gains.empty()) row.mean_improvement = mean_of(gains);
  if (!precisions.empty()) row.mean_first_precision = mean_of(precisions);
}

}  // namespace

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kFull:
      return "st";
    case Variant::kNoSmoothSaliency:
      return "wo_smooth_saliency";
    case Variant::kNoAugmentation:
      return "wo_augmentation";
    case Variant::kNoPseudoLabeling:
      return "wo_pseudo_labeling";
    case Variant::kBaseline:
      return "baseline";
    case Variant::kRandomMasking:
      return "random_masking";
  }
  return "st";
}

Variant parse_variant(std::string_view name) {
  for (auto v : {Variant::kFull, Variant::kNoSmoothSaliency,
                 Variant::kNoAugmentation, Variant::kNoPseudoLabeling,
                 Variant::kBaseline, Variant::kRandomMasking}) {
    if (variant_name(v) == name) return v;
  }
  throw ConfigError("unknown variant '" + std::string(name) + "'");
}

ExperimentConfig parse_experiment_config(const json& doc,
                                         const std::filesystem::path& base) {
  check_keys(doc, "config",
             {"dataset", "labeled_fraction", "st", "gradaug", "mlm", "seeds",
              "variants", "selectors", "output_dir", "write_artifacts",
              "workers"});
  ExperimentConfig c;
  c.workers = default_workers();
  if (!doc.contains("dataset")) throw ConfigError("config: missing dataset");
  const json& ds = doc.at("dataset");
  check_keys(ds, "dataset", {"synthetic", "corpus", "ontology", "max_tokens"});
  if (ds.contains("synthetic")) {
    c.dataset.synthetic = parse_synth(ds.at("synthetic"));
  } else {
    if (!ds.contains("corpus") || !ds.contains("ontology")) {
      throw ConfigError("dataset: need 'synthetic' or 'corpus' + 'ontology'");
    }
    auto resolve = [&](const std::string& p) {
      std::filesystem::path path(p);
      return path.is_relative() && !base.empty() ? base / path : path;
    };
    c.dataset.corpus = resolve(ds.at("corpus").get<std::string>());
    c.dataset.ontology = resolve(ds.at("ontology").get<std::string>());
  }
  read(ds, "max_tokens", c.dataset.load.max_tokens);
  read(doc, "labeled_fraction", c.labeled_fraction);
  if (doc.contains("st")) parse_st(doc.at("st"), c.st);
  if (doc.contains("gradaug")) parse_gradaug(doc.at("gradaug"), c.st.gradaug);
  if (doc.contains("mlm")) parse_mlm(doc.at("mlm"), c.mlm);
  read(doc, "seeds", c.seeds);
  if (doc.contains("variants")) {
    c.variants.clear();
    for (const auto& v : doc.at("variants")) {
      c.variants.push_back(parse_variant(v.get<std::string>()));
    }
  }
  if (doc.contains("selectors")) {
    c.selectors.clear();
    for (const auto& s : doc.at("selectors")) {
      c.selectors.push_back(parse_selector(s.get<std::string>()));
    }
  }
  if (doc.contains("output_dir")) {
    c.output_dir = doc.at("output_dir").get<std::string>();
  }
  read(doc, "write_artifacts", c.write_artifacts);
  read(doc, "workers", c.workers);
  validate(c);
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_experiment_config(doc, path.parent_path());
}

void validate(const ExperimentConfig& c) {
  if (!(c.labeled_fraction > 0.0 && c.labeled_fraction <= 1.0)) {
    throw ConfigError("labeled_fraction must be in (0, 1]");
  }
  if (c.seeds.empty()) throw ConfigError("seeds must be non-empty");
  if (c.variants.empty()) throw ConfigError("variants must be non-empty");
  if (c.selectors.empty()) throw ConfigError("selectors must be non-empty");
  if (c.workers == 0) throw ConfigError("workers must be positive");
  try {
    validate(c.st);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

Dataset load_dataset(const DatasetSource& source) {
  if (source.synthetic) return synth_generate(*source.synthetic);
  return load_jsonl(source.corpus, source.ontology, source.load);
}

STConfig variant_config(const STConfig& base, Variant variant,
                        SelectorKind selector) {
  STConfig c = base;
  c.selector = selector;
  switch (variant) {
    case Variant::kFull:
    case Variant::kBaseline:
      break;
    case Variant::kNoSmoothSaliency:
      c.gradaug.mode = MaskingMode::kVanillaSaliency;
      break;
    case Variant::kRandomMasking:
      c.gradaug.mode = MaskingMode::kRandom;
      break;
    case Variant::kNoAugmentation:
      c.use_augmentation = false;
      break;
    case Variant::kNoPseudoLabeling:
      c.use_pseudo_labeling = false;
      break;
  }
  return c;
}

PreparedSeed prepare_seed(const Dataset& dataset, const ModelBlueprint& bp,
                          const ExperimentConfig& config, std::uint64_t seed) {
  PreparedSeed p;
  p.seed = seed;
  p.split = few_shot_split(dataset, config.labeled_fraction, seed);

  std::vector<Tokens> corpus;
  corpus.reserve(dataset.train.size());
  for (const auto& ex : dataset.train) corpus.push_back(ex.tokens);
  MlmTrainOptions mopts = config.mlm;
  mopts.seed = derive(seed, "mlm");
  p.mlm = mlm_train(corpus, dataset.vocab.size(), mopts);

  STConfig st = config.st;
  st.seed = seed;
  const Pools pools = make_pools(p.split.labeled, p.split.unlabeled);
  STContext ctx{&bp, dataset.validation, &dataset.ontology, &p.mlm,
                &p.split.sealed};
  p.warmup = warmup_teacher(pools, ctx, st);
  return p;
}

bool ExperimentResult::all_ok() const {
  if (!errors.empty()) return false;
  for (const auto& r : rows) {
    for (const auto& s : r.seeds) {
      if (!s.ok) return false;
    }
  }
  return true;
}

json ExperimentResult::aggregate_json() const {
  json j;
  j["primary_metric"] = primary_metric;
  j["rows"] = json::array();
  for (const auto& r : rows) {
    json row;
    row["name"] = r.name;
    row["variant"] = variant_name(r.variant);
    row["selector"] = r.selector ? json(selector_name(*r.selector)) : json();
    row["mean"] = metrics_json(r.mean);
    row["std"] = metrics_json(r.stddev);
    row["mean_improvement_over_baseline"] = r.mean_improvement;
    row["mean_first_iteration_precision"] =
        r.mean_first_precision ? json(*r.mean_first_precision) : json();
    row["seeds"] = json::array();
    for (const auto& s : r.seeds) {
      json sj;
      sj["seed"] = s.seed;
      sj["status"] = s.ok ? "ok" : "failed";
      if (!s.ok) sj["error"] = s.error;
      sj["test"] = metrics_json(s.test);
      sj["validation_metric"] = s.validation_metric;
      sj["baseline_primary"] = s.baseline_primary;
      sj["iterations"] = s.iterations;
      sj["first_iteration_precision"] =
          s.first_iteration_precision ? json(*s.first_iteration_precision)
                                      : json();
      sj["stop_reason"] = s.stop_reason;
      row["seeds"].push_back(std::move(sj));
    }
    j["rows"].push_back(std::move(row));
  }
  j["errors"] = errors;
  return j;
}

json ExperimentResult::timing_json() const {
  json j = json::object();
  for (const auto& r : rows) {
    json per = json::object();
    for (const auto& s : r.seeds) per[std::to_string(s.seed)] = s.wall_ms;
    j[r.name] = std::move(per);
  }
  return j;
}

void ExperimentResult::write_csv(std::ostream& out) const {
  out << "row,variant,selector,seed,status,metric,value\n";
  auto line = [&](const ResultRow& r, const std::string& seed,
                  const std::string& status, const std::string& metric,
                  double value) {
    std::ostringstream v;
    v.precision(17);
    v << value;
    out << r.name << ',' << variant_name(r.variant) << ','
        << (r.selector ? std::string(selector_name(*r.selector)) : "") << ','
        << seed << ',' << status << ',' << metric << ',' << v.str() << '\n';
  };
  for (const auto& r : rows) {
    for (const auto& s : r.seeds) {
      const std::string seed = std::to_string(s.seed);
      if (!s.ok) {
        out << r.name << ',' << variant_name(r.variant) << ','
            << (r.selector ? std::string(selector_name(*r.selector)) : "")
            << ',' << seed << ",failed,,\n";
        continue;
      }
      for (const auto& [k, v] : s.test) line(r, seed, "ok", k, v);
      if (s.first_iteration_precision) {
        line(r, seed, "ok", "first_iteration_precision",
             *s.first_iteration_precision);
      }
    }
    for (const auto& [k, v] : r.mean) line(r, "mean", "", k, v);
    for (const auto& [k, v] : r.stddev) line(r, "std", "", k, v);
  }
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  return run_experiment(config, load_dataset(config.dataset));
}

ExperimentResult run_experiment(const ExperimentConfig& config,
                                const Dataset& dataset) {
  validate(config);
  const ModelBlueprint bp = blueprint_from(dataset);

  ExperimentResult result;
  std::vector<std::pair<Variant, std::optional<SelectorKind>>> specs;
  {
    std::set<std::string> seen;
    for (auto v : config.variants) {
      if (v == Variant::kBaseline) {
        if (seen.insert(row_name(v, std::nullopt)).second) {
          specs.emplace_back(v, std::nullopt);
        }
        continue;
      }
      for (auto s : config.selectors) {
        if (seen.insert(row_name(v, s)).second) specs.emplace_back(v, s);
      }
    }
  }
  for (const auto& [v, s] : specs) {
    ResultRow row;
    row.name = row_name(v, s);
    row.variant = v;
    row.selector = s;
    row.seeds.resize(config.seeds.size());
    result.rows.push_back(std::move(row));
  }

  const bool artifacts = config.write_artifacts && !config.output_dir.empty();
  if (!config.output_dir.empty()) {
    std::filesystem::create_directories(config.output_dir);
  }

  const std::size_t outer =
      std::min<std::size_t>(config.workers, config.seeds.size());
  const std::size_t inner = outer > 1 ? 1 : config.workers;
  std::vector<std::string> seed_errors(config.seeds.size());

  parallel_for(config.seeds.size(), outer, [&](std::size_t si) {
    const std::uint64_t seed = config.seeds[si];
    const auto seed_start = std::chrono::steady_clock::now();
    const std::filesystem::path dir =
        config.output_dir / ("seed_" + std::to_string(seed));
    std::optional<PreparedSeed> prep;
    TaskMetrics warm_test;
    try {
      ExperimentConfig local = config;
      local.st.workers = inner;
      prep = prepare_seed(dataset, bp, local, seed);
      warm_test = evaluate(prep->warmup.model, dataset.test, dataset.ontology,
                           seed, inner);
      if (artifacts) {
        std::filesystem::create_directories(dir);
        save_checkpoint(prep->mlm, seed, dir / "mlm.ckpt.json");
        save_checkpoint(prep->warmup.model, seed, dir / "warmup.ckpt.json");
      }
    } catch (const std::exception& e) {
      seed_errors[si] = "seed " + std::to_string(seed) + ": " + e.what();
      for (auto& row : result.rows) {
        auto& out = row.seeds[si];
        out.seed = seed;
        out.ok = false;
        out.error = e.what();
      }
      return;
    }
    const double prep_ms = elapsed_ms(seed_start);

    for (auto& row : result.rows) {
      auto& out = row.seeds[si];
      out.seed = seed;
      out.baseline_primary = warm_test.primary;
      const auto start = std::chrono::steady_clock::now();
      try {
        if (row.variant == Variant::kBaseline) {
          out.test = warm_test.values;
          out.validation_metric = prep->warmup.report.best_metric;
          out.stop_reason = "no_self_training";
          out.report = {
              {"warmup",
               {{"validation_metric", prep->warmup.report.best_metric},
                {"epochs", prep->warmup.report.epochs_run},
                {"best_epoch", prep->warmup.report.best_epoch}}},
              {"test_metrics", metrics_json(warm_test.values)}};
        } else {
          STConfig st = variant_config(config.st, row.variant, *row.selector);
          st.seed = seed;
          st.workers = inner;
          STContext ctx{&bp, dataset.validation, &dataset.ontology,
                        &prep->mlm, &prep->split.sealed};
          RunResult r = run(prep->split.labeled, prep->split.unlabeled, ctx, st,
                            &prep->warmup);
          TaskMetrics test =
              evaluate(r.best, dataset.test, dataset.ontology, seed, inner);
          r.report.test_metrics = test;
          r.report.warmup_test_metrics = warm_test;
          out.test = test.values;
          out.validation_metric = r.report.best_validation_metric;
          out.iterations = r.report.iterations.size();
          if (!r.report.iterations.empty()) {
            out.first_iteration_precision =
                r.report.iterations.front().pseudo_label_precision;
          }
          out.stop_reason = r.report.stop_reason;
          out.report = r.report.to_json(true);
          if (artifacts) {
            save_checkpoint(r.best, seed,
                            dir / (file_stem(row.name) + ".best.ckpt.json"));
          }
        }
        if (artifacts) {
          std::ofstream f(dir / (file_stem(row.name) + ".report.json"));
          f << out.report.dump(2) << '\n';
        }
      } catch (const std::exception& e) {
        out.ok = false;
        out.error = e.what();
      }
      out.wall_ms = elapsed_ms(start);
      if (row.variant == Variant::kBaseline) out.wall_ms += prep_ms;
    }
  });

  for (const auto& e : seed_errors) {
    if (!e.empty()) result.errors.push_back(e);
  }
  result.primary_metric = primary_metric_name(dataset.ontology.task);
  for (auto& row : result.rows) aggregate(row, result.primary_metric);

  if (!config.output_dir.empty()) {
    std::ofstream(config.output_dir / "aggregate.json")
        << result.aggregate_json().dump(2) << '\n';
    std::ofstream(config.output_dir / "timing.json")
        << result.timing_json().dump(2) << '\n';
    std::ofstream csv(config.output_dir / "results.csv");
    result.write_csv(csv);
  }
  return result;
}

}  // namespace gradst
