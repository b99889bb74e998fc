// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

// Masked language model abstraction and the shared update schedule.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mdl/prompting.hpp"

namespace mdl {

struct TrainConfig {
  double learning_rate = 5e-5;
  std::size_t batch_size = 1;
  std::size_t grad_accumulation = 16;
  std::size_t warmup_steps = 10;
  double dropout = 0.1;
  std::size_t max_epochs_step1 = 1;
  /// Consecutive non-improving evaluations before a phase stops.
  std::size_t early_stop_patience = 5;
  /// Effective updates between validation passes.
  std::size_t eval_every = 100;
  /// Hard cap on effective updates for open-ended phases.
  std::size_t max_updates = 2000;

  /// Throws ConfigError.
  void validate() const;
  /// Stable textual form, used in cache keys and provenance.
  std::string fingerprint() const;
};

/// Linear warmup from 0 to the configured rate; `update` counts from 1.
double scheduled_learning_rate(const TrainConfig& config, std::size_t update);

/// Immutable model state. Parameters are shared, never mutated in place.
struct Snapshot {
  std::string backend_id;
  std::uint64_t seed = 0;
  std::shared_ptr<const std::vector<double>> parameters;

  bool bitwise_equal(const Snapshot& other) const;
};

/// Versioned binary format; round-trips bit-exactly. Throws ConfigError on
/// malformed or foreign files.
void write_snapshot(const std::filesystem::path& path, const Snapshot& snapshot);
Snapshot read_snapshot(const std::filesystem::path& path);

struct LabelExample {
  std::string prompted;
  const LabelSubwords* label_subwords = nullptr;
  std::size_t gold = 0;
};

struct MlmOutcome {
  double loss = 0.0;
  std::vector<std::size_t> masked_positions;
};

class ModelBackend : public SubwordTokenizer {
 public:
  ~ModelBackend() override = default;

  virtual std::string id() const = 0;
  virtual std::string_view mask_token() const = 0;
  virtual std::size_t vocab_size() const = 0;

  /// Distribution at the single mask position. Throws ConfigError unless the
  /// text holds exactly one mask token.
  virtual std::vector<double> mask_distribution(std::string_view prompted) const = 0;

  /// Adds weight * d(label loss)/d(params) to the gradient buffer; returns the loss.
  virtual double accumulate_label(const LabelExample& example, double weight) = 0;
  /// Masks ceil(15%) of the subwords (at least one) and accumulates the
  /// reconstruction gradient.
  virtual MlmOutcome accumulate_mlm(std::string_view text, double weight) = 0;
  /// Applies the buffered gradient times `grad_scale` and clears the buffer.
  virtual void apply_update(double learning_rate, double grad_scale) = 0;
  virtual void reset_optimizer() = 0;

  /// Seeds dropout and masking.
  virtual void set_seed(std::uint64_t seed) = 0;
  virtual void set_dropout(double rate) = 0;

  virtual Snapshot snapshot() const = 0;
  virtual void restore(const Snapshot& snapshot) = 0;
  virtual std::unique_ptr<ModelBackend> clone() const = 0;
};

/// Gradient accumulation plus warmup over a backend. One micro-batch per call;
/// an effective update is applied every `grad_accumulation` micro-batches.
class UpdateScheduler {
 public:
  UpdateScheduler(ModelBackend& backend, const TrainConfig& config);

  struct Step {
    double loss = 0.0;
    bool updated = false;
  };

  /// Mean label cross-entropy of the micro-batch. Throws TrainingError on a
  /// non-finite loss.
  Step label_step(std::span<const LabelExample> batch);
  Step mlm_step(std::string_view text);
  /// Applies a pending partial window. Returns true if an update happened.
  bool flush();

  std::size_t updates() const { return updates_; }
  std::size_t micro_steps() const { return micro_steps_; }
  /// Mean micro-batch loss over the last completed window.
  double last_window_loss() const { return last_window_loss_; }

 private:
  Step finish_micro_step(double loss, std::string_view what);
  void apply(std::size_t window_size);

  ModelBackend& backend_;
  TrainConfig config_;
  std::size_t updates_ = 0;
  std::size_t micro_steps_ = 0;
  std::size_t pending_ = 0;
  double window_loss_sum_ = 0.0;
  double last_window_loss_ = 0.0;
};

}  // namespace mdl
