// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

#include "mdl/backend.hpp"

#include <fmt/format.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "mdl/delimited.hpp"
#include "mdl/errors.hpp"
#include "mdl/random.hpp"

namespace mdl {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (grad_accumulation == 0) throw ConfigError("grad_accumulation must be positive");
  if (warmup_steps == 0) throw ConfigError("warmup_steps must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  if (max_epochs_step1 == 0) throw ConfigError("max_epochs_step1 must be positive");
  if (early_stop_patience == 0) throw ConfigError("early_stop_patience must be positive");
  if (eval_every == 0) throw ConfigError("eval_every must be positive");
  if (max_updates == 0) throw ConfigError("max_updates must be positive");
}

std::string TrainConfig::fingerprint() const {
  return fmt::format("lr={:.17g};bs={};ga={};warmup={};dropout={:.17g};epochs1={};patience={};eval_every={};max_updates={}",
                     learning_rate, batch_size, grad_accumulation, warmup_steps, dropout, max_epochs_step1,
                     early_stop_patience, eval_every, max_updates);
}

double scheduled_learning_rate(const TrainConfig& config, std::size_t update) {
  if (update >= config.warmup_steps) return config.learning_rate;
  return config.learning_rate * static_cast<double>(update) / static_cast<double>(config.warmup_steps);
}

bool Snapshot::bitwise_equal(const Snapshot& other) const {
  if (backend_id != other.backend_id || !parameters || !other.parameters) return false;
  if (parameters->size() != other.parameters->size()) return false;
  return std::memcmp(parameters->data(), other.parameters->data(), parameters->size() * sizeof(double)) == 0;
}

namespace {

constexpr char kSnapshotMagic[8] = {'M', 'D', 'L', 'S', 'N', 'A', 'P', '\0'};
constexpr std::uint32_t kSnapshotVersion = 1;

template <typename T>
void put(std::string& out, const T& value) {
  out.append(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T take(std::string_view& in, const std::filesystem::path& path) {
  if (in.size() < sizeof(T)) throw ConfigError(fmt::format("snapshot {} is truncated", path.string()));
  T value;
  std::memcpy(&value, in.data(), sizeof(T));
  in.remove_prefix(sizeof(T));
  return value;
}

}  // namespace

void write_snapshot(const std::filesystem::path& path, const Snapshot& snapshot) {
  if (!snapshot.parameters) throw ConfigError("cannot write an empty snapshot");
  std::string out(kSnapshotMagic, sizeof(kSnapshotMagic));
  put(out, kSnapshotVersion);
  put(out, snapshot.seed);
  put(out, static_cast<std::uint32_t>(snapshot.backend_id.size()));
  out += snapshot.backend_id;
  put(out, static_cast<std::uint64_t>(snapshot.parameters->size()));
  out.append(reinterpret_cast<const char*>(snapshot.parameters->data()), snapshot.parameters->size() * sizeof(double));
  put(out, fnv1a(out));
  write_file_atomic(path, out);
}

Snapshot read_snapshot(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < sizeof(kSnapshotMagic) + sizeof(std::uint64_t) ||
      std::memcmp(bytes.data(), kSnapshotMagic, sizeof(kSnapshotMagic)) != 0) {
    throw ConfigError(fmt::format("{} is not a model snapshot", path.string()));
  }
  std::string_view body(bytes.data(), bytes.size() - sizeof(std::uint64_t));
  std::uint64_t stored_hash;
  std::memcpy(&stored_hash, bytes.data() + body.size(), sizeof(stored_hash));
  if (fnv1a(body) != stored_hash) throw ConfigError(fmt::format("snapshot {} fails its checksum", path.string()));

  std::string_view in = body.substr(sizeof(kSnapshotMagic));
  const auto version = take<std::uint32_t>(in, path);
  if (version != kSnapshotVersion) {
    throw ConfigError(fmt::format("snapshot {} has unsupported version {}", path.string(), version));
  }
  Snapshot snapshot;
  snapshot.seed = take<std::uint64_t>(in, path);
  const auto id_size = take<std::uint32_t>(in, path);
  if (in.size() < id_size) throw ConfigError(fmt::format("snapshot {} is truncated", path.string()));
  snapshot.backend_id = std::string(in.substr(0, id_size));
  in.remove_prefix(id_size);
  const auto count = take<std::uint64_t>(in, path);
  if (in.size() != count * sizeof(double)) throw ConfigError(fmt::format("snapshot {} is truncated", path.string()));
  auto params = std::make_shared<std::vector<double>>(count);
  std::memcpy(params->data(), in.data(), in.size());
  snapshot.parameters = std::move(params);
  return snapshot;
}

UpdateScheduler::UpdateScheduler(ModelBackend& backend, const TrainConfig& config)
    : backend_(backend), config_(config) {
  config_.validate();
}

UpdateScheduler::Step UpdateScheduler::label_step(std::span<const LabelExample> batch) {
  if (batch.empty()) throw TrainingError("empty micro-batch");
  const double weight = 1.0 / (static_cast<double>(batch.size()) * static_cast<double>(config_.grad_accumulation));
  double loss = 0.0;
  for (const auto& example : batch) loss += backend_.accumulate_label(example, weight);
  loss /= static_cast<double>(batch.size());
  return finish_micro_step(loss, batch.front().prompted);
}

UpdateScheduler::Step UpdateScheduler::mlm_step(std::string_view text) {
  const MlmOutcome outcome = backend_.accumulate_mlm(text, 1.0 / static_cast<double>(config_.grad_accumulation));
  return finish_micro_step(outcome.loss, text);
}

UpdateScheduler::Step UpdateScheduler::finish_micro_step(double loss, std::string_view what) {
  if (!std::isfinite(loss)) {
    throw TrainingError(fmt::format("non-finite loss {} at update {} (micro-step {}) on input '{}'", loss,
                                    updates_ + 1, micro_steps_ + 1, what.substr(0, 80)));
  }
  ++micro_steps_;
  ++pending_;
  window_loss_sum_ += loss;
  Step step{loss, false};
  if (pending_ == config_.grad_accumulation) {
    apply(pending_);
    step.updated = true;
  }
  return step;
}

bool UpdateScheduler::flush() {
  if (pending_ == 0) return false;
  apply(pending_);
  return true;
}

void UpdateScheduler::apply(std::size_t window_size) {
  ++updates_;
  // Micro-batches were weighted by 1/grad_accumulation; rescale partial windows to a mean.
  const double scale = static_cast<double>(config_.grad_accumulation) / static_cast<double>(window_size);
  backend_.apply_update(scheduled_learning_rate(config_, updates_), scale);
  last_window_loss_ = window_loss_sum_ / static_cast<double>(window_size);
  window_loss_sum_ = 0.0;
  pending_ = 0;
}

}  // namespace mdl
