// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

// Multi-dataset training (externals -> general model), few-shot target
// adaptation, the baselines and ablations, and multi-seed experiment runs.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mdl/backend.hpp"
#include "mdl/corpus.hpp"
#include "mdl/eval.hpp"
#include "mdl/run_log.hpp"

namespace mdl {

enum class MethodKind { kMdl, kLmBase, kMlm, kMtl, kMdlSpec, kCrossJoint, kCross3Steps, kCrossSingle };

std::string_view to_string(MethodKind method);
/// Accepts MDL, LM_BASE, MLM, MTL, MDL_SPEC, CROSS_JOINT, CROSS_3STEPS, CROSS_SINGLE.
MethodKind parse_method(std::string_view text);
bool requires_related(MethodKind method);

inline constexpr std::array<std::size_t, 6> kNShotSweep = {1, 4, 8, 16, 32, 64};

using LabelRemovals = std::map<std::string, std::vector<std::string>>;

struct RunDescriptor {
  MethodKind method = MethodKind::kMdl;
  std::string target;
  std::optional<std::string> related;
  std::size_t n_shots = 4;
  std::size_t valid_size = 16;
  std::vector<std::uint64_t> seeds_step2 = {1, 2, 3, 4, 5};
  std::uint64_t seed_step1 = 0;
  TrainConfig config;
  /// MDL_SPEC removals per external dataset; unset means the manifest's
  /// declared external-only labels.
  std::optional<LabelRemovals> external_only_labels;

  /// Throws ConfigError for unknown datasets, wrong roles, or a related
  /// dataset given to (or missing from) the wrong method.
  void validate(const Corpus& corpus) const;
  /// Seeds actually used: the first seed alone for MTL.
  std::vector<std::uint64_t> effective_seeds() const;
  std::string name() const;
};

/// One descriptor per n in kNShotSweep.
std::vector<RunDescriptor> expand_nshot_sweep(const RunDescriptor& base);

/// A dataset bound to its PVP and the backend's subwords.
struct Task {
  std::string dataset_id;
  Pvp pvp;
  LabelSubwords label_subwords;
  std::vector<Sample> train;
  std::vector<Sample> valid;
};

Task make_task(const LoadedDataset& dataset, const SubwordTokenizer& tokenizer);
Task make_task(std::string dataset_id, const Pvp& pvp, std::vector<Sample> train, std::vector<Sample> valid,
               const SubwordTokenizer& tokenizer);

struct ScheduledBatch {
  std::size_t task = 0;
  std::vector<std::size_t> samples;
};

/// Every task's shuffled training samples cut into batches, then the union of
/// batches shuffled: one pass visits every sample once and selects each
/// dataset in proportion to its size.
std::vector<ScheduledBatch> external_schedule(std::span<const Task> tasks, std::size_t batch_size, std::uint64_t seed);

ConfusionMatrix evaluate(const ModelBackend& model, const Task& task, std::span<const Sample> samples);
/// Mean macro-F1 over the validation splits of tasks that have one.
double validation_score(const ModelBackend& model, std::span<const Task> tasks);

struct PhaseResult {
  /// Best-validation snapshot; the starting model counts as a candidate.
  /// Without any validation data, the final model.
  Snapshot model;
  double initial_score = 0.0;
  double best_score = 0.0;
  /// Validation passes after the initial one.
  std::size_t evaluations = 0;
  std::size_t best_evaluation = 0;
  std::size_t updates = 0;
  std::size_t micro_steps = 0;
  bool early_stopped = false;
  std::vector<double> update_losses;
  std::vector<std::size_t> dataset_steps;
  std::vector<std::string> warnings;
};

struct PhaseContext {
  RunLog* log = nullptr;
  std::string run;
  std::string phase;
};

/// One epoch (config.max_epochs_step1) over all externals with early
/// stopping on aggregate validation. Empty externals return `start`.
PhaseResult train_external(const ModelBackend& prototype, const Snapshot& start, std::span<const Task> externals,
                           const TrainConfig& config, std::uint64_t seed, const PhaseContext& context = {});

/// Repeated passes over target.train until early stopping on target.valid or
/// config.max_updates.
PhaseResult adapt_target(const ModelBackend& prototype, const Snapshot& start, const Task& target,
                         const TrainConfig& config, std::uint64_t seed, const PhaseContext& context = {});

/// One epoch of masked-LM updates over every training text of the tasks.
PhaseResult train_mlm(const ModelBackend& prototype, const Snapshot& start, std::span<const Task> tasks,
                      const TrainConfig& config, std::uint64_t seed, const PhaseContext& context = {});

/// Drops listed labels from training and validation data and verbalizers.
/// Tasks left without labels or training samples are removed with a warning.
std::vector<Task> remove_labels(std::vector<Task> tasks, const LabelRemovals& removals,
                                const SubwordTokenizer& tokenizer, std::vector<std::string>& warnings);

class ModelCache {
 public:
  virtual ~ModelCache() = default;
  virtual std::optional<Snapshot> find(const std::string& key) = 0;
  virtual void store(const std::string& key, const Snapshot& snapshot) = 0;
};

class MemoryModelCache final : public ModelCache {
 public:
  std::optional<Snapshot> find(const std::string& key) override;
  void store(const std::string& key, const Snapshot& snapshot) override;
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, Snapshot> entries_;
};

struct ExperimentOptions {
  std::size_t jobs = 1;
  RunLog* log = nullptr;
  /// Defaults to a private in-memory cache.
  ModelCache* cache = nullptr;
  /// When set, every seed's shots and validation draw are written here.
  std::optional<std::filesystem::path> shots_dir;
};

struct SeedResult {
  std::uint64_t seed = 0;
  Snapshot model;
  LabelValues test_f1;
  std::vector<Sample> shots;
  std::vector<Sample> validation;
  PhaseResult phase;
};

/// Runs descriptors against one corpus and one initial model, caching every
/// pre-adaptation model by its training inputs.
class Experiment {
 public:
  Experiment(const Corpus& corpus, const ModelBackend& initial_model, ExperimentOptions options = {});

  const Snapshot& initial_snapshot() const { return m0_; }

  /// Externals left after leakage filtering for the descriptor's target.
  std::vector<DatasetSpec> externals_for(const RunDescriptor& descriptor) const;

  /// The model adaptation starts from: M0 for LM_BASE, the external model for
  /// MDL, the MLM-adapted model for MLM, and so on. Not defined for MTL.
  Snapshot start_model(const RunDescriptor& descriptor);

  /// The general external model for a target (MDL step 1), cached.
  Snapshot train_external_model(const RunDescriptor& descriptor);

  SeedResult run_seed(const RunDescriptor& descriptor, std::uint64_t seed);
  EvalReport run(const RunDescriptor& descriptor);

  std::size_t phases_trained() const { return phases_trained_; }
  std::size_t cache_hits() const { return cache_hits_; }

 private:
  std::vector<Task> tasks_for(std::span<const DatasetSpec> specs) const;
  Snapshot cached(const std::string& key, const std::function<Snapshot()>& build);
  std::string cache_key(std::string_view kind, std::span<const DatasetSpec> datasets, const RunDescriptor& descriptor,
                        std::string_view extra = {}) const;
  std::string run_name(const RunDescriptor& descriptor, std::uint64_t seed) const;

  const Corpus& corpus_;
  const ModelBackend& prototype_;
  Snapshot m0_;
  ExperimentOptions options_;
  MemoryModelCache own_cache_;
  std::mutex cache_mutex_;
  std::size_t phases_trained_ = 0;
  std::size_t cache_hits_ = 0;
};

/// Convenience wrapper around Experiment::run.
EvalReport run_experiment(const Corpus& corpus, const ModelBackend& initial_model, const RunDescriptor& descriptor,
                          ExperimentOptions options = {});

}  // namespace mdl
