// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

// Seeded n-shot and validation draws for a target dataset.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mdl/corpus.hpp"

namespace mdl {

struct FewShotPlan {
  std::size_t n_per_label = 4;
  std::size_t valid_size = 16;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Draw {
  std::vector<Sample> samples;
  std::vector<std::string> warnings;
};

/// min(n_per_label, available) samples per label, uniformly without
/// replacement. Throws ConfigError naming any label with no training samples.
Draw sample_few_shot(std::span<const Sample> train, std::span<const std::string> labels, const FewShotPlan& plan);

/// Largest-remainder apportionment of `total` over `counts`; ties go to the
/// earlier label.
std::vector<std::size_t> largest_remainder_quotas(std::span<const std::size_t> counts, std::size_t total);

/// Draws up to plan.valid_size samples from `pool` with per-label quotas
/// following the label distribution of `full_train`. Labels short of their
/// quota hand the remainder to labels with spare samples.
Draw sample_validation(std::span<const Sample> pool, std::span<const Sample> full_train,
                       std::span<const std::string> labels, const FewShotPlan& plan);

/// `train` without the samples in `drawn` (by uid).
std::vector<Sample> remaining_pool(std::span<const Sample> train, std::span<const Sample> drawn);

/// Writes drawn samples as TSV (uid, label, text) for auditing a run's shots.
void write_draw(const std::filesystem::path& path, std::span<const Sample> samples);

}  // namespace mdl
