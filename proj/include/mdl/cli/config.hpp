// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

// Experiment configuration files. Flags override file fields.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mdl/backend.hpp"
#include "mdl/corpus.hpp"
#include "mdl/reference_backend.hpp"
#include "mdl/trainer.hpp"

namespace mdl::cli {

/// One "runs" entry before expansion into descriptors.
struct RunSpec {
  std::vector<MethodKind> methods;
  std::string target;
  std::optional<std::string> related;
  std::vector<std::size_t> n_shots = {4};
  std::size_t valid_size = 16;
  std::optional<LabelRemovals> external_only_labels;
};

struct ExperimentConfig {
  std::filesystem::path manifest;
  std::filesystem::path output_dir;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::uint64_t seed_step1 = 0;
  std::string backend = "reference";
  ReferenceBackendOptions reference;
  std::size_t vocab_min_count = 1;
  TrainConfig train;
  std::size_t jobs = 1;
  std::vector<RunSpec> runs;

  /// Every (method, target, n) combination with the global seeds applied.
  std::vector<RunDescriptor> descriptors() const;
  /// Canonical JSON of the effective settings; hashed into provenance.
  std::string canonical_json() const;
};

/// Relative paths resolve against `base_dir`. Throws ConfigError.
ExperimentConfig parse_experiment_config(std::string_view json_text, const std::filesystem::path& base_dir);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct Overrides {
  std::optional<std::filesystem::path> out;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<std::string> backend;
  std::optional<std::size_t> jobs;
};
void apply_overrides(ExperimentConfig& config, const Overrides& overrides);

/// "1,2,5" or ranges like "1-5".
std::vector<std::uint64_t> parse_seed_list(std::string_view text);

/// Builds the configured backend over the corpus vocabulary.
std::unique_ptr<ModelBackend> make_backend(const ExperimentConfig& config, const Corpus& corpus);

/// Unknown datasets, wrong roles and bad run settings, all before training.
void validate_against(const ExperimentConfig& config, const Corpus& corpus);

}  // namespace mdl::cli
