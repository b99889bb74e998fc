// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

// Synthetic corpora written to disk as ordinary manifests: a keyword-labelled
// behaviour suite and a metadata-only replica of the full multi-dataset setup.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

namespace mdl {

struct BehaviorFixtureOptions {
  std::uint64_t seed = 7;
  std::size_t external_train = 200;
  std::size_t external_valid = 50;
  std::size_t external_test = 50;
  /// Target train counts for normal, hate, offensive, insult. Validation is
  /// carved from these, and n=64 still leaves a validation pool per label.
  std::size_t target_train[4] = {160, 120, 120, 100};
  std::size_t target_test_per_label = 50;
  /// Adds a related dataset "rel" sharing the target's labels.
  bool with_related = false;
};

/// Three externals (ext_hate, ext_offense, ext_misc) and the target "target"
/// whose label "insult" occurs in no external. Labels follow from keywords;
/// insult keywords mostly overlap those of the external-only label "fearful".
/// Returns the manifest path.
std::filesystem::path write_behavior_fixture(const std::filesystem::path& dir,
                                             const BehaviorFixtureOptions& options = {});

/// 9 externals and 13 targets with the real label sets and source groups and
/// a handful of generated samples each. Returns the manifest path.
std::filesystem::path write_setup_manifest(const std::filesystem::path& dir, std::size_t samples_per_label = 6);

}  // namespace mdl
