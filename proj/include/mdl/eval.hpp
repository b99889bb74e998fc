// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

// Per-label F1, macro-F1, seed aggregation and report files.

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mdl/corpus.hpp"

namespace mdl {

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::vector<std::string> labels);

  void add(std::size_t gold, std::size_t predicted, std::size_t count = 1);
  void add(std::string_view gold, std::string_view predicted);

  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  /// Rows are gold labels, columns predictions.
  std::size_t at(std::size_t gold, std::size_t predicted) const { return counts_[gold * labels_.size() + predicted]; }
  std::size_t total() const { return total_; }

 private:
  std::size_t index_of(std::string_view label) const;

  std::vector<std::string> labels_;
  std::vector<std::size_t> counts_;
  std::size_t total_ = 0;
};

using LabelValues = std::vector<std::pair<std::string, double>>;

/// F1 = 2PR/(P+R); a label with no true positives scores 0, including labels
/// that are never gold and never predicted.
LabelValues per_label_f1(const ConfusionMatrix& cm);

/// Unweighted mean. Throws ConfigError on an empty map.
double macro_f1(const LabelValues& per_label);

struct SeedAggregate {
  double mean = 0.0;
  /// Population standard deviation.
  double std = 0.0;
};
SeedAggregate aggregate_seeds(std::span<const double> values);

/// Target labels that occur in none of the externals.
std::vector<std::string> flag_unseen_labels(const DatasetSpec& target, std::span<const DatasetSpec> externals);

struct LabelStat {
  std::string label;
  double mean = 0.0;
  double std = 0.0;
};

struct EvalReport {
  std::string method;
  std::string target;
  std::size_t n_shots = 0;
  std::size_t seed_count = 0;
  std::vector<LabelStat> per_label;
  double macro_mean = 0.0;
  double macro_std = 0.0;
  std::vector<double> seed_macro_f1;
  std::vector<std::string> unseen_labels;
};

/// Builds a report from per-seed per-label F1 (all seeds share label order).
EvalReport summarize_seeds(std::string method, std::string target, std::size_t n_shots,
                           std::span<const LabelValues> per_seed, std::vector<std::string> unseen_labels);

/// TSV columns: method, target, n, seed_count, macro_mean, macro_std, then
/// <label>_mean, <label>_std per label. All rows must share the label set.
std::string format_report(std::span<const EvalReport> reports);
void write_report(const std::filesystem::path& path, std::span<const EvalReport> reports);
std::vector<EvalReport> read_report(const std::filesystem::path& path);

}  // namespace mdl
