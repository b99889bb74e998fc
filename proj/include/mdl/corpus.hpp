// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

// Dataset manifests, label canonicalization, splits and leakage filtering.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mdl/prompting.hpp"

namespace mdl {

enum class Genre { kMicroblog, kForum, kOther };
enum class DatasetRole { kExternal, kTarget, kRelated };
enum class SplitPolicy { kExplicitFiles, kRatio8020 };
enum class SplitProvenance { kOfficialSplits, kDerived8020 };

std::string_view to_string(Genre genre);
std::string_view to_string(DatasetRole role);
std::string_view to_string(SplitPolicy policy);
Genre parse_genre(std::string_view text);
DatasetRole parse_role(std::string_view text);
SplitPolicy parse_split_policy(std::string_view text);

struct DatasetSpec {
  std::string id;
  /// Datasets sharing a source group are never used to train for each other.
  std::string source_group;
  std::string language;
  Genre genre = Genre::kMicroblog;
  DatasetRole role = DatasetRole::kExternal;
  /// Canonical label names in declaration order.
  std::vector<std::string> labels;
  std::string pvp_id;
  SplitPolicy split_policy = SplitPolicy::kExplicitFiles;
  /// Labels dropped when building a target-specialized external model.
  std::vector<std::string> external_only_labels;

  bool has_label(std::string_view label) const;
};

struct Sample {
  std::string text;
  std::string label;
  std::string dataset_id;
  /// Unique within the dataset; identifies the sample across splits.
  std::size_t uid = 0;
};

struct SampleSet {
  std::vector<Sample> train;
  std::vector<Sample> valid;
  std::vector<Sample> test;
  SplitProvenance provenance = SplitProvenance::kOfficialSplits;
};

/// alias -> canonical label. canon() is idempotent by construction: no
/// canonical name may itself be an alias.
class LabelCanonMap {
 public:
  LabelCanonMap() = default;

  /// Normal-class unification, hateful->hate, sexism->misogyny, active->individual.
  static LabelCanonMap defaults();

  /// Throws ConfigError if the entry would break idempotence.
  void add(std::string alias, std::string canonical);
  std::string canon(std::string_view label) const;
  /// Entries of `overrides` replace entries of *this.
  LabelCanonMap merged(const LabelCanonMap& overrides) const;
  const std::map<std::string, std::string, std::less<>>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string, std::less<>> entries_;
};

struct LoadedDataset {
  DatasetSpec spec;
  SampleSet samples;
  Pvp pvp;
  /// Hash of the dataset's samples, used for cache keys.
  std::uint64_t content_hash = 0;
};

/// Immutable result of loading a manifest.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<LoadedDataset> datasets, LabelCanonMap canon);

  const std::vector<LoadedDataset>& datasets() const { return datasets_; }
  bool contains(std::string_view id) const;
  /// Throws ConfigError for unknown ids.
  const LoadedDataset& dataset(std::string_view id) const;
  std::vector<DatasetSpec> specs_with_role(DatasetRole role) const;
  const LabelCanonMap& canon() const { return canon_; }

 private:
  std::vector<LoadedDataset> datasets_;
  LabelCanonMap canon_;
};

/// Reads a JSON manifest. Data file paths are relative to the manifest.
/// Throws ConfigError naming the offending entry for missing files, unknown
/// labels and duplicate ids.
Corpus load_manifest(const std::filesystem::path& path);
Corpus parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir);

/// Explicit files pass through (a missing validation split is carved from
/// train). The ratio policy carves an 80/20 train/test split when no test split
/// is given and an 80/20 train/valid split when no validation is given.
/// Throws ConfigError when a ratio split needs more than the available samples.
SampleSet make_splits(SampleSet given, SplitPolicy policy, std::uint64_t seed);

/// Seeded 80/20 split of `samples` into (first, second) parts.
std::pair<std::vector<Sample>, std::vector<Sample>> split_80_20(std::vector<Sample> samples, std::uint64_t seed);

/// Externals whose source group differs from the target's, order preserved.
std::vector<DatasetSpec> leakage_filter(std::span<const DatasetSpec> externals, const DatasetSpec& target);

/// Order-independent identity of a set of external datasets.
std::string external_config_key(std::span<const DatasetSpec> externals);

std::set<std::string> distinct_external_configs(std::span<const DatasetSpec> externals,
                                                std::span<const DatasetSpec> targets);

}  // namespace mdl
