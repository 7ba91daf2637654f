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

#include "gradst/selftrain.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <map>
#include <set>

#include "gradst/parallel.h"

namespace gradst {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::string_view what,
                          std::uint64_t index) {
  Rng r = Rng(seed).child(what).child(index);
  return r();
}

std::string now_iso8601() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json metrics_json(const TaskMetrics& m) {
  nlohmann::json j;
  j["primary"] = m.primary_name;
  for (const auto& [k, v] : m.values) j[k] = v;
  return j;
}

TrainOptions train_options(const STConfig& c, std::size_t patience,
                           std::size_t max_epochs) {
  TrainOptions o;
  o.learning_rate = c.learning_rate;
  o.batch_size = c.batch_size;
  o.patience = patience;
  o.max_epochs = max_epochs;
  o.eval_seed = c.seed;
  o.workers = c.workers;
  return o;
}

void check_context(const STContext& ctx) {
  if (!ctx.blueprint || !ctx.ontology) {
    throw InvalidInput("self-training context needs a blueprint and ontology");
  }
}

}  // namespace

std::string_view selector_name(SelectorKind kind) {
  switch (kind) {
    case SelectorKind::kTopK:
      return "top_k";
    case SelectorKind::kRandomK:
      return "random_k";
    case SelectorKind::kLeastK:
      return "least_k";
    case SelectorKind::kSelectAll:
      return "select_all";
  }
  return "top_k";
}

SelectorKind parse_selector(std::string_view name) {
  for (auto k : {SelectorKind::kTopK, SelectorKind::kRandomK,
                 SelectorKind::kLeastK, SelectorKind::kSelectAll}) {
    if (selector_name(k) == name) return k;
  }
  throw InvalidInput("unknown selector '" + std::string(name) + "'");
}

void validate(const STConfig& c) {
  if (c.k < 1 && c.selector != SelectorKind::kSelectAll) {
    throw InvalidInput("self-training: k must be >= 1");
  }
  if (c.batch_size == 0) throw InvalidInput("self-training: zero batch size");
  if (!(c.learning_rate > 0.0)) {
    throw InvalidInput("self-training: learning rate must be positive");
  }
  if (c.warmup_patience == 0 || c.inner_patience == 0 ||
      c.outer_patience == 0) {
    throw InvalidInput("self-training: patience values must be positive");
  }
  if (!(c.pretrained_embedding_rms >= 0.0)) {
    throw InvalidInput("self-training: negative pretrained embedding rms");
  }
  validate(c.gradaug);
}

nlohmann::json to_json(const STConfig& c) {
  nlohmann::json j;
  j["k"] = c.k;
  j["selector"] = selector_name(c.selector);
  j["warmup_patience"] = c.warmup_patience;
  j["inner_patience"] = c.inner_patience;
  j["outer_patience"] = c.outer_patience;
  j["max_iterations"] = c.max_iterations;
  j["warmup_max_epochs"] = c.warmup_max_epochs;
  j["student_max_epochs"] = c.student_max_epochs;
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["embed_dim"] = c.shape.embed_dim;
  j["hidden_dim"] = c.shape.hidden_dim;
  j["dropout"] = c.shape.dropout_rate;
  j["similarity_scale"] = c.shape.similarity_scale;
  j["embed_init_scale"] = c.shape.embed_init_scale;
  j["pretrained_embedding_rms"] = c.pretrained_embedding_rms;
  j["use_augmentation"] = c.use_augmentation;
  j["use_pseudo_labeling"] = c.use_pseudo_labeling;
  j["seed"] = c.seed;
  const auto& g = c.gradaug;
  j["gradaug"] = {{"q", g.q},
                  {"beta", g.beta},
                  {"m", g.noise_count},
                  {"noise_variance", g.noise_variance},
                  {"mask_ratio", g.mask_ratio},
                  {"importance_floor", g.importance_floor},
                  {"top_k", g.top_k},
                  {"mode", masking_mode_name(g.mode)}};
  return j;
}

std::vector<Example> Pools::training_set() const {
  std::vector<Example> out;
  out.reserve(labeled.size() + relabelable.size());
  for (const auto& e : labeled) out.push_back(e.example);
  for (const auto& e : relabelable) out.push_back(e.example);
  return out;
}

Pools make_pools(std::span<const Example> labeled,
                 std::span<const Example> unlabeled) {
  Pools p;
  std::set<std::string> ids;
  for (const auto& ex : labeled) {
    if (!ex.label) throw InvalidInput("labeled pool entry without label: " + ex.id);
    if (!ids.insert(ex.id).second) throw InvalidInput("duplicate id " + ex.id);
    p.labeled.push_back({ex, Provenance::kGold, 0});
  }
  for (const auto& ex : unlabeled) {
    if (!ids.insert(ex.id).second) throw InvalidInput("duplicate id " + ex.id);
    Example copy = ex;
    copy.label.reset();
    p.unlabeled.push_back(std::move(copy));
  }
  return p;
}

namespace {

TaskModel fresh_model(const STContext& context, const STConfig& config,
                      std::uint64_t seed) {
  TaskModel model = init_model(*context.blueprint, config.shape, seed);
  if (config.pretrained_embedding_rms == 0.0 || !context.mlm) return model;
  const Mat& src = context.mlm->embeddings;
  Mat& dst = model.encoder.embeddings;
  if (src.rows() != dst.rows() || src.cols() != dst.cols()) {
    throw InvalidInput("self-training: MLM embeddings are " +
                       std::to_string(src.rows()) + "x" +
                       std::to_string(src.cols()) + ", encoder expects " +
                       std::to_string(dst.rows()) + "x" +
                       std::to_string(dst.cols()));
  }
  double sq = 0.0;
  for (double v : src.data()) sq += v * v;
  const double rms = std::sqrt(sq / static_cast<double>(src.data().size()));
  if (!(rms > 0.0)) return model;
  const double scale = config.pretrained_embedding_rms / rms;
  for (std::size_t r = 0; r < dst.rows(); ++r) {
    for (std::size_t c = 0; c < dst.cols(); ++c) dst(r, c) = src(r, c) * scale;
  }
  return model;
}

}  // namespace

FitResult warmup_teacher(const Pools& pools, const STContext& context,
                         const STConfig& config) {
  check_context(context);
  if (pools.labeled.empty()) throw InvalidInput("warmup: labeled pool empty");
  TaskModel init =
      fresh_model(context, config, derive_seed(config.seed, "teacher", 0));
  const auto train = pools.training_set();
  return fit(std::move(init), train, context.validation, *context.ontology,
             train_options(config, config.warmup_patience,
                           config.warmup_max_epochs),
             Rng(config.seed).child("warmup_fit"));
}

std::vector<PseudoLabeled> pseudo_label(const TaskModel& teacher,
                                        std::span<const Example> pool,
                                        std::size_t iteration,
                                        std::size_t workers) {
  const ModelView view(teacher);
  std::vector<std::optional<PseudoLabeled>> slots(pool.size());
  parallel_for(pool.size(), workers, [&](std::size_t i) {
    try {
      Prediction p = view.predict(pool[i].tokens);
      slots[i] = PseudoLabeled{i, pool[i].id, std::move(p.label), p.confidence,
                               iteration};
    } catch (const std::exception& e) {
      throw std::runtime_error("pseudo-labeling " + pool[i].id + ": " +
                               e.what());
    }
  });
  std::vector<PseudoLabeled> out;
  out.reserve(pool.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.id < b.id;
  });
  return out;
}

std::vector<PseudoLabeled> select(const std::vector<PseudoLabeled>& priority,
                                  const STConfig& config, Rng& rng) {
  const std::size_t n = priority.size();
  const std::size_t k = std::min(config.k, n);
  switch (config.selector) {
    case SelectorKind::kTopK:
      return {priority.begin(), priority.begin() + static_cast<long>(k)};
    case SelectorKind::kLeastK:
      return {priority.end() - static_cast<long>(k), priority.end()};
    case SelectorKind::kSelectAll:
      return priority;
    case SelectorKind::kRandomK: {
      std::vector<std::size_t> idx(n);
      for (std::size_t i = 0; i < n; ++i) idx[i] = i;
      for (std::size_t i = 0; i < k; ++i) {
        std::swap(idx[i], idx[i + rng.below(n - i)]);
      }
      idx.resize(k);
      std::sort(idx.begin(), idx.end());
      std::vector<PseudoLabeled> out;
      for (auto i : idx) out.push_back(priority[i]);
      return out;
    }
  }
  return {};
}

IterationOutcome st_iteration(Pools& pools, const TaskModel& teacher,
                              const STContext& context, const STConfig& config,
                              std::size_t iteration) {
  check_context(context);
  const auto start = std::chrono::steady_clock::now();
  IterationReport rep;
  rep.iteration = iteration;

  if (config.use_pseudo_labeling) {
    const bool relabel = config.selector == SelectorKind::kSelectAll;
    std::vector<Example> candidates = pools.unlabeled;
    if (relabel) {
      for (const auto& e : pools.relabelable) {
        Example ex = e.example;
        ex.label.reset();
        candidates.push_back(std::move(ex));
      }
    }
    const auto priority =
        pseudo_label(teacher, candidates, iteration, config.workers);
    Rng sel_rng = Rng(config.seed).child("select").child(iteration);
    const auto chosen = select(priority, config, sel_rng);

    std::size_t correct = 0, judged = 0;
    double conf = 0.0;
    std::vector<char> taken(candidates.size(), 0);
    std::vector<LabeledEntry> moved;
    for (const auto& pl : chosen) {
      conf += pl.confidence;
      taken[pl.index] = 1;
      Example ex = candidates[pl.index];
      ex.label = pl.label;
      if (context.sealed) {
        if (const LabelValue* truth = context.sealed->lookup(ex.id)) {
          ++judged;
          correct += *truth == pl.label;
        }
      }
      moved.push_back({std::move(ex), Provenance::kPseudo, iteration});
    }
    rep.selected = chosen.size();
    if (!chosen.empty()) {
      rep.selected_mean_confidence = conf / static_cast<double>(chosen.size());
    }
    if (judged) {
      rep.pseudo_label_precision =
          static_cast<double>(correct) / static_cast<double>(judged);
    }
    if (relabel) {
      pools.relabelable = std::move(moved);
      pools.unlabeled.clear();
    } else {
      std::vector<Example> remaining;
      for (std::size_t i = 0; i < pools.unlabeled.size(); ++i) {
        if (!taken[i]) remaining.push_back(std::move(pools.unlabeled[i]));
      }
      pools.unlabeled = std::move(remaining);
      for (auto& m : moved) pools.labeled.push_back(std::move(m));
    }
  }

  rep.labeled = pools.labeled.size();
  rep.unlabeled = pools.unlabeled.size();
  rep.relabelable = pools.relabelable.size();

  const std::vector<Example> train = pools.training_set();
  std::vector<Example> augmented;
  if (config.use_augmentation) {
    if (!context.mlm) throw InvalidInput("augmentation needs a trained MLM");
    GradAugResult aug =
        gradaug(train, teacher, *context.mlm, config.gradaug,
                derive_seed(config.seed, "gradaug", iteration), config.workers);
    rep.augmentation_failures = aug.failures.size();
    augmented = std::move(aug.augmented);
  } else {
    augmented = train;
  }
  rep.augmented = augmented.size();

  IterationOutcome out{teacher, rep};
  TaskModel student = fresh_model(
      context, config, derive_seed(config.seed, "student", iteration));
  try {
    FitResult fitted =
        fit(std::move(student), augmented, context.validation,
            *context.ontology,
            train_options(config, config.inner_patience,
                          config.student_max_epochs),
            Rng(config.seed).child("student_fit").child(iteration));
    out.teacher = std::move(fitted.model);
    out.report.student_epochs = fitted.report.epochs_run;
    out.report.validation_metric = fitted.report.best_metric;
  } catch (const TrainingDiverged& e) {
    out.report.ok = false;
    out.report.error = e.what();
  }
  out.report.wall_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - start)
                           .count();
  return out;
}

nlohmann::json RunReport::to_json(bool include_timing) const {
  nlohmann::json j;
  j["config"] = config;
  j["warmup"] = {{"validation_metric", warmup_validation_metric},
                 {"epochs", warmup_epochs},
                 {"best_epoch", warmup_best_epoch}};
  j["iterations"] = nlohmann::json::array();
  for (const auto& it : iterations) {
    nlohmann::json r;
    r["iteration"] = it.iteration;
    r["status"] = it.ok ? "ok" : "failed";
    if (!it.ok) r["error"] = it.error;
    r["labeled"] = it.labeled;
    r["unlabeled"] = it.unlabeled;
    r["relabelable"] = it.relabelable;
    r["selected"] = it.selected;
    r["selected_mean_confidence"] = it.selected_mean_confidence;
    r["pseudo_label_precision"] =
        it.pseudo_label_precision ? nlohmann::json(*it.pseudo_label_precision)
                                  : nlohmann::json(nullptr);
    r["augmented"] = it.augmented;
    r["augmentation_failures"] = it.augmentation_failures;
    r["student_epochs"] = it.student_epochs;
    r["validation_metric"] = it.validation_metric;
    j["iterations"].push_back(std::move(r));
  }
  j["best_iteration"] = best_iteration;
  j["best_validation_metric"] = best_validation_metric;
  j["stop_reason"] = stop_reason;
  if (test_metrics) j["test_metrics"] = metrics_json(*test_metrics);
  if (warmup_test_metrics) {
    j["warmup_test_metrics"] = metrics_json(*warmup_test_metrics);
  }
  if (include_timing) {
    nlohmann::json t;
    t["timestamp"] = timestamp;
    t["iteration_wall_ms"] = nlohmann::json::array();
    for (const auto& it : iterations) t["iteration_wall_ms"].push_back(it.wall_ms);
    j["timing"] = std::move(t);
  }
  return j;
}

RunResult run(std::span<const Example> labeled,
              std::span<const Example> unlabeled, const STContext& context,
              const STConfig& config, const FitResult* warmup) {
  validate(config);
  check_context(context);
  Pools pools = make_pools(labeled, unlabeled);
  FitResult warm = warmup ? *warmup : warmup_teacher(pools, context, config);

  RunResult result{warm.model, warm.model, {}};
  RunReport& rep = result.report;
  rep.config = to_json(config);
  rep.warmup_validation_metric = warm.report.best_metric;
  rep.warmup_epochs = warm.report.epochs_run;
  rep.warmup_best_epoch = warm.report.best_epoch;
  rep.best_validation_metric = warm.report.best_metric;

  TaskModel teacher = warm.model;
  std::size_t since_best = 0;
  rep.stop_reason = "max_iterations";
  for (std::size_t it = 1; it <= config.max_iterations; ++it) {
    if (config.use_pseudo_labeling && pools.unlabeled.empty() &&
        pools.relabelable.empty()) {
      rep.stop_reason = "unlabeled_exhausted";
      break;
    }
    IterationOutcome out = st_iteration(pools, teacher, context, config, it);
    if (out.report.ok) {
      teacher = std::move(out.teacher);
      if (out.report.validation_metric > rep.best_validation_metric) {
        rep.best_validation_metric = out.report.validation_metric;
        rep.best_iteration = it;
        result.best = teacher;
        since_best = 0;
      } else {
        ++since_best;
      }
    } else {
      ++since_best;
    }
    rep.iterations.push_back(std::move(out.report));
    if (since_best >= config.outer_patience) {
      rep.stop_reason = "outer_patience";
      break;
    }
  }
  rep.timestamp = now_iso8601();
  return result;
}

}  // namespace gradst
