// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

#include "mdl/trainer.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <thread>

#include "mdl/errors.hpp"
#include "mdl/random.hpp"
#include "mdl/sampler.hpp"

namespace mdl {

std::string_view to_string(MethodKind method) {
  switch (method) {
    case MethodKind::kMdl: return "MDL";
    case MethodKind::kLmBase: return "LM_BASE";
    case MethodKind::kMlm: return "MLM";
    case MethodKind::kMtl: return "MTL";
    case MethodKind::kMdlSpec: return "MDL_SPEC";
    case MethodKind::kCrossJoint: return "CROSS_JOINT";
    case MethodKind::kCross3Steps: return "CROSS_3STEPS";
    case MethodKind::kCrossSingle: return "CROSS_SINGLE";
  }
  return "MDL";
}

MethodKind parse_method(std::string_view text) {
  for (auto m : {MethodKind::kMdl, MethodKind::kLmBase, MethodKind::kMlm, MethodKind::kMtl, MethodKind::kMdlSpec,
                 MethodKind::kCrossJoint, MethodKind::kCross3Steps, MethodKind::kCrossSingle}) {
    if (to_string(m) == text) return m;
  }
  throw ConfigError(fmt::format("unknown method '{}'", text));
}

bool requires_related(MethodKind method) {
  return method == MethodKind::kCrossJoint || method == MethodKind::kCross3Steps || method == MethodKind::kCrossSingle;
}

void RunDescriptor::validate(const Corpus& corpus) const {
  config.validate();
  FewShotPlan{n_shots, valid_size, 0}.validate();
  if (seeds_step2.empty()) throw ConfigError(fmt::format("{}: needs at least one step-2 seed", name()));
  const auto& t = corpus.dataset(target);
  if (t.spec.role != DatasetRole::kTarget) {
    throw ConfigError(fmt::format("{}: dataset '{}' is not a target dataset", name(), target));
  }
  if (requires_related(method) != related.has_value()) {
    throw ConfigError(fmt::format("{}: a related dataset is {} for {}", name(),
                                  related ? "not allowed" : "required", to_string(method)));
  }
  if (related) corpus.dataset(*related);
  if (external_only_labels) {
    for (const auto& [id, labels] : *external_only_labels) {
      const auto& d = corpus.dataset(id);
      for (const auto& label : labels) {
        if (!d.spec.has_label(corpus.canon().canon(label))) {
          throw ConfigError(fmt::format("{}: '{}' is not a label of '{}'", name(), label, id));
        }
      }
    }
  }
}

std::vector<std::uint64_t> RunDescriptor::effective_seeds() const {
  if (method == MethodKind::kMtl) return {seeds_step2.front()};
  return seeds_step2;
}

std::string RunDescriptor::name() const {
  return fmt::format("{}/{}/n={}", to_string(method), target, n_shots);
}

std::vector<RunDescriptor> expand_nshot_sweep(const RunDescriptor& base) {
  std::vector<RunDescriptor> out;
  for (std::size_t n : kNShotSweep) {
    RunDescriptor d = base;
    d.n_shots = n;
    out.push_back(std::move(d));
  }
  return out;
}

Task make_task(std::string dataset_id, const Pvp& pvp, std::vector<Sample> train, std::vector<Sample> valid,
               const SubwordTokenizer& tokenizer) {
  Task task;
  task.dataset_id = std::move(dataset_id);
  task.pvp = pvp;
  task.label_subwords = verbalizer_subwords(pvp.verbalizer, tokenizer);
  task.train = std::move(train);
  task.valid = std::move(valid);
  return task;
}

Task make_task(const LoadedDataset& dataset, const SubwordTokenizer& tokenizer) {
  return make_task(dataset.spec.id, dataset.pvp, dataset.samples.train, dataset.samples.valid, tokenizer);
}

std::vector<ScheduledBatch> external_schedule(std::span<const Task> tasks, std::size_t batch_size, std::uint64_t seed) {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  std::vector<ScheduledBatch> batches;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    std::vector<std::size_t> order(tasks[t].train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, "order:" + tasks[t].dataset_id));
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      batches.push_back({t, std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                     order.begin() + static_cast<std::ptrdiff_t>(end))});
    }
  }
  Rng rng(derive_seed(seed, "batches"));
  rng.shuffle(std::span<ScheduledBatch>(batches));
  return batches;
}

ConfusionMatrix evaluate(const ModelBackend& model, const Task& task, std::span<const Sample> samples) {
  ConfusionMatrix cm(task.label_subwords.labels);
  for (const auto& s : samples) {
    cm.add(task.label_subwords.index_of(s.label), predict_index(s.text, task.pvp, task.label_subwords, model));
  }
  return cm;
}

double validation_score(const ModelBackend& model, std::span<const Task> tasks) {
  double sum = 0.0;
  std::size_t counted = 0;
  for (const auto& task : tasks) {
    if (task.valid.empty()) continue;
    sum += macro_f1(per_label_f1(evaluate(model, task, task.valid)));
    ++counted;
  }
  return counted == 0 ? 0.0 : sum / static_cast<double>(counted);
}

namespace {

LabelExample to_example(const Task& task, const Sample& sample, const ModelBackend& model) {
  return LabelExample{apply_pattern(sample.text, task.pvp.pattern, model.mask_token()).text, &task.label_subwords,
                      task.label_subwords.index_of(sample.label)};
}

/// Shared loop of supervised phases: micro-batches from `next_batch` until it
/// runs dry, early stopping fires, or the update cap is hit.
class SupervisedPhase {
 public:
  SupervisedPhase(const ModelBackend& prototype, const Snapshot& start, std::span<const Task> tasks,
                  std::span<const Task> validation, const TrainConfig& config, std::uint64_t seed,
                  const PhaseContext& context)
      : model_(prototype.clone()), tasks_(tasks), validation_(validation), config_(config), context_(context) {
    model_->restore(start);
    model_->reset_optimizer();
    model_->set_seed(seed);
    model_->set_dropout(config.dropout);
    result_.dataset_steps.assign(tasks.size(), 0);
    result_.model = model_->snapshot();
    for (const auto& t : validation_) selects_ = selects_ || !t.valid.empty();
    result_.initial_score = validation_score(*model_, validation_);
    result_.best_score = result_.initial_score;
    log_eval(0, result_.initial_score);
  }

  /// Returns false once the phase must stop.
  bool step(std::size_t task_index, std::span<const std::size_t> sample_indices) {
    const Task& task = tasks_[task_index];
    std::vector<LabelExample> batch;
    batch.reserve(sample_indices.size());
    for (std::size_t i : sample_indices) batch.push_back(to_example(task, task.train[i], *model_));
    const auto outcome = scheduler_.label_step(batch);
    ++result_.dataset_steps[task_index];
    last_dataset_ = task.dataset_id;
    if (!outcome.updated) return true;
    return after_update();
  }

  PhaseResult finish() {
    if (!stopped_ && scheduler_.flush()) after_update();
    if (!stopped_ && selects_ && evaluated_at_ != scheduler_.updates()) evaluate_now();
    // Without validation data there is nothing to select on: keep the last model.
    if (!selects_) result_.model = model_->snapshot();
    result_.updates = scheduler_.updates();
    result_.micro_steps = scheduler_.micro_steps();
    return std::move(result_);
  }

 private:
  bool after_update() {
    result_.update_losses.push_back(scheduler_.last_window_loss());
    if (context_.log) {
      context_.log->record({context_.run, context_.phase, scheduler_.updates(), last_dataset_,
                            scheduler_.last_window_loss(), std::nullopt, ""});
    }
    if (selects_ && scheduler_.updates() % config_.eval_every == 0) evaluate_now();
    if (!stopped_ && scheduler_.updates() >= config_.max_updates) stopped_ = true;
    return !stopped_;
  }

  void evaluate_now() {
    evaluated_at_ = scheduler_.updates();
    ++result_.evaluations;
    const double score = validation_score(*model_, validation_);
    log_eval(scheduler_.updates(), score);
    if (score > result_.best_score) {
      result_.best_score = score;
      result_.best_evaluation = result_.evaluations;
      result_.model = model_->snapshot();
      since_improvement_ = 0;
    } else if (++since_improvement_ >= config_.early_stop_patience) {
      result_.early_stopped = true;
      stopped_ = true;
    }
  }

  void log_eval(std::size_t update, double score) {
    if (context_.log) context_.log->record({context_.run, context_.phase, update, "", std::nullopt, score, ""});
  }

  std::unique_ptr<ModelBackend> model_;
  std::span<const Task> tasks_;
  std::span<const Task> validation_;
  TrainConfig config_;
  PhaseContext context_;
  UpdateScheduler scheduler_{*model_, config_};
  PhaseResult result_;
  std::string last_dataset_;
  std::size_t evaluated_at_ = 0;
  std::size_t since_improvement_ = 0;
  bool selects_ = false;
  bool stopped_ = false;
};

}  // namespace

PhaseResult train_external(const ModelBackend& prototype, const Snapshot& start, std::span<const Task> externals,
                           const TrainConfig& config, std::uint64_t seed, const PhaseContext& context) {
  config.validate();
  if (externals.empty()) {
    PhaseResult result;
    result.model = start;
    result.warnings.push_back("no external datasets: the starting model is returned unchanged");
    if (context.log) context.log->warn(context.run, result.warnings.back());
    return result;
  }
  SupervisedPhase phase(prototype, start, externals, externals, config, seed, context);
  bool running = true;
  for (std::size_t epoch = 0; running && epoch < config.max_epochs_step1; ++epoch) {
    for (const auto& batch : external_schedule(externals, config.batch_size, derive_seed(seed, epoch))) {
      if (!(running = phase.step(batch.task, batch.samples))) break;
    }
  }
  return phase.finish();
}

PhaseResult adapt_target(const ModelBackend& prototype, const Snapshot& start, const Task& target,
                         const TrainConfig& config, std::uint64_t seed, const PhaseContext& context) {
  config.validate();
  if (target.train.empty()) throw ConfigError(fmt::format("target '{}' has no training shots", target.dataset_id));
  const std::span<const Task> tasks(&target, 1);
  SupervisedPhase phase(prototype, start, tasks, tasks, config, seed, context);
  std::vector<std::size_t> order(target.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::uint64_t epoch = 0;; ++epoch) {
    Rng rng(derive_seed(seed, epoch));
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t i = 0; i < order.size(); i += config.batch_size) {
      const std::size_t end = std::min(order.size(), i + config.batch_size);
      if (!phase.step(0, std::span<const std::size_t>(order.data() + i, end - i))) return phase.finish();
    }
  }
}

PhaseResult train_mlm(const ModelBackend& prototype, const Snapshot& start, std::span<const Task> tasks,
                      const TrainConfig& config, std::uint64_t seed, const PhaseContext& context) {
  config.validate();
  PhaseResult result;
  if (tasks.empty()) {
    result.model = start;
    result.warnings.push_back("no external texts for masked-LM training");
    return result;
  }
  auto model = prototype.clone();
  model->restore(start);
  model->reset_optimizer();
  model->set_seed(seed);
  model->set_dropout(config.dropout);
  UpdateScheduler scheduler(*model, config);

  std::vector<std::pair<std::size_t, std::size_t>> texts;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    for (std::size_t i = 0; i < tasks[t].train.size(); ++i) texts.emplace_back(t, i);
  }
  Rng rng(derive_seed(seed, "mlm-order"));
  rng.shuffle(std::span<std::pair<std::size_t, std::size_t>>(texts));
  result.dataset_steps.assign(tasks.size(), 0);
  auto log_update = [&](std::size_t task) {
    result.update_losses.push_back(scheduler.last_window_loss());
    if (context.log) {
      context.log->record({context.run, context.phase, scheduler.updates(), tasks[task].dataset_id,
                           scheduler.last_window_loss(), std::nullopt, ""});
    }
  };
  for (const auto& [t, i] : texts) {
    ++result.dataset_steps[t];
    if (scheduler.mlm_step(tasks[t].train[i].text).updated) log_update(t);
  }
  if (scheduler.flush()) log_update(texts.back().first);
  result.updates = scheduler.updates();
  result.micro_steps = scheduler.micro_steps();
  result.model = model->snapshot();
  return result;
}

std::vector<Task> remove_labels(std::vector<Task> tasks, const LabelRemovals& removals,
                                const SubwordTokenizer& tokenizer, std::vector<std::string>& warnings) {
  std::vector<Task> kept;
  for (auto& task : tasks) {
    const auto it = removals.find(task.dataset_id);
    if (it == removals.end() || it->second.empty()) {
      kept.push_back(std::move(task));
      continue;
    }
    const std::set<std::string> drop(it->second.begin(), it->second.end());
    std::vector<std::string> labels;
    for (const auto& label : task.pvp.verbalizer.labels()) {
      if (!drop.contains(label)) labels.push_back(label);
    }
    auto filter = [&](std::vector<Sample>& samples) {
      std::erase_if(samples, [&](const Sample& s) { return drop.contains(s.label); });
    };
    filter(task.train);
    filter(task.valid);
    if (labels.empty() || task.train.empty()) {
      warnings.push_back(fmt::format("dataset '{}' is empty after label removal and is dropped", task.dataset_id));
      continue;
    }
    Pvp pvp = task.pvp;
    pvp.verbalizer = task.pvp.verbalizer.restricted_to(labels);
    kept.push_back(make_task(task.dataset_id, pvp, std::move(task.train), std::move(task.valid), tokenizer));
  }
  return kept;
}

std::optional<Snapshot> MemoryModelCache::find(const std::string& key) {
  std::lock_guard lock(mutex_);
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void MemoryModelCache::store(const std::string& key, const Snapshot& snapshot) {
  std::lock_guard lock(mutex_);
  entries_[key] = snapshot;
}

std::size_t MemoryModelCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

Experiment::Experiment(const Corpus& corpus, const ModelBackend& initial_model, ExperimentOptions options)
    : corpus_(corpus), prototype_(initial_model), m0_(initial_model.snapshot()), options_(std::move(options)) {
  if (options_.jobs == 0) options_.jobs = 1;
  if (options_.cache == nullptr) options_.cache = &own_cache_;
}

std::vector<DatasetSpec> Experiment::externals_for(const RunDescriptor& descriptor) const {
  const auto externals = corpus_.specs_with_role(DatasetRole::kExternal);
  return leakage_filter(externals, corpus_.dataset(descriptor.target).spec);
}

std::vector<Task> Experiment::tasks_for(std::span<const DatasetSpec> specs) const {
  std::vector<Task> tasks;
  for (const auto& spec : specs) tasks.push_back(make_task(corpus_.dataset(spec.id), prototype_));
  return tasks;
}

std::string Experiment::cache_key(std::string_view kind, std::span<const DatasetSpec> datasets,
                                  const RunDescriptor& descriptor, std::string_view extra) const {
  std::uint64_t data_hash = fnv1a("data");
  std::vector<std::string> ids;
  for (const auto& d : datasets) ids.push_back(d.id);
  std::sort(ids.begin(), ids.end());
  for (const auto& id : ids) {
    const auto h = corpus_.dataset(id).content_hash;
    data_hash = fnv1a(std::string_view(reinterpret_cast<const char*>(&h), sizeof(h)), data_hash);
  }
  return fmt::format("{}|{}|{}|seed1={}|{}|backend={}|data={:016x}", kind, external_config_key(datasets), extra,
                     descriptor.seed_step1, descriptor.config.fingerprint(), prototype_.id(), data_hash);
}

Snapshot Experiment::cached(const std::string& key, const std::function<Snapshot()>& build) {
  std::lock_guard lock(cache_mutex_);
  if (auto hit = options_.cache->find(key)) {
    ++cache_hits_;
    return *hit;
  }
  Snapshot built = build();
  ++phases_trained_;
  options_.cache->store(key, built);
  return built;
}

std::string Experiment::run_name(const RunDescriptor& descriptor, std::uint64_t seed) const {
  return fmt::format("{}/seed={}", descriptor.name(), seed);
}

Snapshot Experiment::train_external_model(const RunDescriptor& descriptor) {
  const auto externals = externals_for(descriptor);
  return cached(cache_key("mdl", externals, descriptor), [&] {
    const auto tasks = tasks_for(externals);
    return train_external(prototype_, m0_, tasks, descriptor.config, derive_seed(descriptor.seed_step1, "step1"),
                          {options_.log, external_config_key(externals), "step1"})
        .model;
  });
}

Snapshot Experiment::start_model(const RunDescriptor& descriptor) {
  const TrainConfig& config = descriptor.config;
  const std::uint64_t step1_seed = derive_seed(descriptor.seed_step1, "step1");
  switch (descriptor.method) {
    case MethodKind::kLmBase:
      return m0_;
    case MethodKind::kMdl:
      return train_external_model(descriptor);
    case MethodKind::kMlm: {
      const auto externals = externals_for(descriptor);
      return cached(cache_key("mlm", externals, descriptor), [&] {
        const auto tasks = tasks_for(externals);
        return train_mlm(prototype_, m0_, tasks, config, derive_seed(descriptor.seed_step1, "mlm"),
                         {options_.log, external_config_key(externals), "mlm"})
            .model;
      });
    }
    case MethodKind::kMdlSpec: {
      const auto externals = externals_for(descriptor);
      LabelRemovals removals;
      if (descriptor.external_only_labels) {
        for (const auto& [id, labels] : *descriptor.external_only_labels) {
          for (const auto& l : labels) removals[id].push_back(corpus_.canon().canon(l));
        }
      } else {
        for (const auto& e : externals) {
          if (!e.external_only_labels.empty()) removals[e.id] = e.external_only_labels;
        }
      }
      std::string removal_key;
      for (const auto& [id, labels] : removals) {
        std::vector<std::string> sorted = labels;
        std::sort(sorted.begin(), sorted.end());
        for (const auto& l : sorted) removal_key += id + ":" + l + ";";
      }
      // Without removals this is exactly the MDL external model.
      if (removal_key.empty()) return train_external_model(descriptor);
      return cached(cache_key("mdl_spec", externals, descriptor, removal_key), [&] {
        std::vector<std::string> warnings;
        const auto tasks = remove_labels(tasks_for(externals), removals, prototype_, warnings);
        for (const auto& w : warnings) {
          if (options_.log) options_.log->warn(descriptor.name(), w);
        }
        return train_external(prototype_, m0_, tasks, config, step1_seed,
                              {options_.log, external_config_key(externals), "step1_spec"})
            .model;
      });
    }
    case MethodKind::kCrossJoint: {
      auto datasets = externals_for(descriptor);
      datasets.push_back(corpus_.dataset(*descriptor.related).spec);
      return cached(cache_key("mdl", datasets, descriptor), [&] {
        const auto tasks = tasks_for(datasets);
        return train_external(prototype_, m0_, tasks, config, step1_seed,
                              {options_.log, external_config_key(datasets), "step1"})
            .model;
      });
    }
    case MethodKind::kCross3Steps: {
      const Snapshot general = train_external_model(descriptor);
      const auto externals = externals_for(descriptor);
      const DatasetSpec related = corpus_.dataset(*descriptor.related).spec;
      return cached(cache_key("related_after", externals, descriptor, related.id), [&] {
        const auto tasks = tasks_for(std::span<const DatasetSpec>(&related, 1));
        return train_external(prototype_, general, tasks, config, step1_seed, {options_.log, related.id, "related"})
            .model;
      });
    }
    case MethodKind::kCrossSingle: {
      const DatasetSpec related = corpus_.dataset(*descriptor.related).spec;
      const std::span<const DatasetSpec> only(&related, 1);
      return cached(cache_key("mdl", only, descriptor), [&] {
        const auto tasks = tasks_for(only);
        return train_external(prototype_, m0_, tasks, config, step1_seed, {options_.log, related.id, "related"})
            .model;
      });
    }
    case MethodKind::kMtl:
      break;
  }
  throw ConfigError("MTL has no separate pre-adaptation model");
}

SeedResult Experiment::run_seed(const RunDescriptor& descriptor, std::uint64_t seed) {
  const LoadedDataset& target = corpus_.dataset(descriptor.target);
  const std::string run = run_name(descriptor, seed);
  const FewShotPlan plan{descriptor.n_shots, descriptor.valid_size, seed};

  SeedResult result;
  result.seed = seed;
  Draw shots = sample_few_shot(target.samples.train, target.spec.labels, plan);
  const std::vector<Sample> pool = remaining_pool(target.samples.train, shots.samples);
  Draw validation = sample_validation(pool, target.samples.train, target.spec.labels, plan);
  if (options_.log) {
    for (const auto& w : shots.warnings) options_.log->warn(run, w);
    for (const auto& w : validation.warnings) options_.log->warn(run, w);
  }
  if (options_.shots_dir) {
    const std::string stem = fmt::format("{}_{}_n{}_seed{}", to_string(descriptor.method), descriptor.target,
                                         descriptor.n_shots, seed);
    write_draw(*options_.shots_dir / (stem + "_shots.tsv"), shots.samples);
    write_draw(*options_.shots_dir / (stem + "_valid.tsv"), validation.samples);
  }

  Task target_task = make_task(target.spec.id, target.pvp, shots.samples, validation.samples, prototype_);
  if (descriptor.method == MethodKind::kMtl) {
    const auto externals = externals_for(descriptor);
    std::vector<Task> tasks = tasks_for(externals);
    tasks.push_back(target_task);
    result.phase = train_external(prototype_, m0_, tasks, descriptor.config, derive_seed(descriptor.seed_step1, "step1"),
                                  {options_.log, run, "joint"});
  } else {
    const Snapshot start = start_model(descriptor);
    result.phase = adapt_target(prototype_, start, target_task, descriptor.config, derive_seed(seed, "step2"),
                                {options_.log, run, "step2"});
  }
  result.model = result.phase.model;

  auto model = prototype_.clone();
  model->restore(result.model);
  result.test_f1 = per_label_f1(evaluate(*model, target_task, target.samples.test));
  result.shots = std::move(shots.samples);
  result.validation = std::move(validation.samples);
  return result;
}

EvalReport Experiment::run(const RunDescriptor& descriptor) {
  descriptor.validate(corpus_);
  const std::vector<std::uint64_t> seeds = descriptor.effective_seeds();
  // Step 1 runs once, before the seeds fan out.
  if (descriptor.method != MethodKind::kMtl) start_model(descriptor);

  std::vector<LabelValues> per_seed(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  auto work = [&](std::size_t i) {
    try {
      per_seed[i] = run_seed(descriptor, seeds[i]).test_f1;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t jobs = std::min(options_.jobs, seeds.size());
  if (jobs <= 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i) work(i);
  } else {
    std::vector<std::thread> workers;
    std::atomic<std::size_t> next{0};
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < seeds.size(); i = next++) work(i);
      });
    }
    for (auto& w : workers) w.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  const auto externals = externals_for(descriptor);
  return summarize_seeds(std::string(to_string(descriptor.method)), descriptor.target, descriptor.n_shots, per_seed,
                         flag_unseen_labels(corpus_.dataset(descriptor.target).spec, externals));
}

EvalReport run_experiment(const Corpus& corpus, const ModelBackend& initial_model, const RunDescriptor& descriptor,
                          ExperimentOptions options) {
  Experiment experiment(corpus, initial_model, std::move(options));
  return experiment.run(descriptor);
}

}  // namespace mdl
