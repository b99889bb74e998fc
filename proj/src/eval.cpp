// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

#include "mdl/eval.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "mdl/delimited.hpp"
#include "mdl/errors.hpp"

namespace mdl {

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> labels)
    : labels_(std::move(labels)), counts_(labels_.size() * labels_.size(), 0) {}

void ConfusionMatrix::add(std::size_t gold, std::size_t predicted, std::size_t count) {
  if (gold >= labels_.size() || predicted >= labels_.size()) throw ConfigError("confusion matrix index out of range");
  counts_[gold * labels_.size() + predicted] += count;
  total_ += count;
}

void ConfusionMatrix::add(std::string_view gold, std::string_view predicted) { add(index_of(gold), index_of(predicted)); }

std::size_t ConfusionMatrix::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) return i;
  }
  throw ConfigError(fmt::format("label '{}' is not in the confusion matrix", label));
}

LabelValues per_label_f1(const ConfusionMatrix& cm) {
  const std::size_t n = cm.size();
  LabelValues out;
  out.reserve(n);
  for (std::size_t l = 0; l < n; ++l) {
    std::size_t predicted = 0;
    std::size_t gold = 0;
    for (std::size_t k = 0; k < n; ++k) {
      predicted += cm.at(k, l);
      gold += cm.at(l, k);
    }
    const std::size_t tp = cm.at(l, l);
    double f1 = 0.0;
    if (tp > 0) {
      const double precision = static_cast<double>(tp) / static_cast<double>(predicted);
      const double recall = static_cast<double>(tp) / static_cast<double>(gold);
      f1 = 2.0 * precision * recall / (precision + recall);
    }
    out.emplace_back(cm.labels()[l], f1);
  }
  return out;
}

double macro_f1(const LabelValues& per_label) {
  if (per_label.empty()) throw ConfigError("macro-F1 of an empty label set");
  double sum = 0.0;
  for (const auto& [label, f1] : per_label) sum += f1;
  return sum / static_cast<double>(per_label.size());
}

SeedAggregate aggregate_seeds(std::span<const double> values) {
  if (values.empty()) throw ConfigError("cannot aggregate zero seeds");
  // Sorting makes the floating-point sums independent of seed order.
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double v : sorted) sum += v;
  const double mean = sum / static_cast<double>(sorted.size());
  std::vector<double> sq;
  sq.reserve(sorted.size());
  for (double v : sorted) sq.push_back((v - mean) * (v - mean));
  std::sort(sq.begin(), sq.end());
  double var = 0.0;
  for (double s : sq) var += s;
  var /= static_cast<double>(sorted.size());
  return {mean, std::sqrt(var)};
}

std::vector<std::string> flag_unseen_labels(const DatasetSpec& target, std::span<const DatasetSpec> externals) {
  std::set<std::string> seen;
  for (const auto& e : externals) seen.insert(e.labels.begin(), e.labels.end());
  std::vector<std::string> unseen;
  for (const auto& label : target.labels) {
    if (!seen.contains(label)) unseen.push_back(label);
  }
  return unseen;
}

EvalReport summarize_seeds(std::string method, std::string target, std::size_t n_shots,
                           std::span<const LabelValues> per_seed, std::vector<std::string> unseen_labels) {
  if (per_seed.empty()) throw ConfigError("cannot summarize zero seeds");
  EvalReport report;
  report.method = std::move(method);
  report.target = std::move(target);
  report.n_shots = n_shots;
  report.seed_count = per_seed.size();
  report.unseen_labels = std::move(unseen_labels);
  for (const auto& seed : per_seed) report.seed_macro_f1.push_back(macro_f1(seed));
  const SeedAggregate macro = aggregate_seeds(report.seed_macro_f1);
  report.macro_mean = macro.mean;
  report.macro_std = macro.std;
  const std::size_t labels = per_seed.front().size();
  for (std::size_t l = 0; l < labels; ++l) {
    std::vector<double> values;
    for (const auto& seed : per_seed) {
      if (seed.size() != labels || seed[l].first != per_seed.front()[l].first) {
        throw ConfigError("per-seed label sets differ");
      }
      values.push_back(seed[l].second);
    }
    const SeedAggregate agg = aggregate_seeds(values);
    report.per_label.push_back({per_seed.front()[l].first, agg.mean, agg.std});
  }
  return report;
}

namespace {

std::string number(double value) { return fmt::format("{:.6f}", value); }

double parse_double(const std::string& text, const std::filesystem::path& path) {
  try {
    std::size_t used = 0;
    const double value = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("{}: '{}' is not a number", path.string(), text));
  }
}

std::size_t parse_count(const std::string& text, const std::filesystem::path& path) {
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ConfigError(fmt::format("{}: '{}' is not a count", path.string(), text));
  }
  return value;
}

}  // namespace

std::string format_report(std::span<const EvalReport> reports) {
  Table table;
  table.header = {"method", "target", "n", "seed_count", "macro_mean", "macro_std"};
  if (!reports.empty()) {
    for (const auto& stat : reports.front().per_label) {
      table.header.push_back(stat.label + "_mean");
      table.header.push_back(stat.label + "_std");
    }
  }
  for (const auto& r : reports) {
    if (r.per_label.size() != reports.front().per_label.size()) {
      throw ConfigError("report rows must share one label set");
    }
    std::vector<std::string> row = {r.method, r.target, std::to_string(r.n_shots), std::to_string(r.seed_count),
                                    number(r.macro_mean), number(r.macro_std)};
    for (std::size_t l = 0; l < r.per_label.size(); ++l) {
      if (r.per_label[l].label != reports.front().per_label[l].label) {
        throw ConfigError("report rows must share one label set");
      }
      row.push_back(number(r.per_label[l].mean));
      row.push_back(number(r.per_label[l].std));
    }
    table.rows.push_back(std::move(row));
  }
  return format_delimited(table, '\t');
}

void write_report(const std::filesystem::path& path, std::span<const EvalReport> reports) {
  write_file_atomic(path, format_report(reports));
}

std::vector<EvalReport> read_report(const std::filesystem::path& path) {
  const Table table = parse_delimited(read_file(path), '\t');
  static const std::vector<std::string> kFixed = {"method", "target", "n", "seed_count", "macro_mean", "macro_std"};
  if (table.header.size() < kFixed.size() || !std::equal(kFixed.begin(), kFixed.end(), table.header.begin()) ||
      (table.header.size() - kFixed.size()) % 2 != 0) {
    throw ConfigError(fmt::format("{} is not a report file", path.string()));
  }
  std::vector<std::string> labels;
  for (std::size_t c = kFixed.size(); c < table.header.size(); c += 2) {
    const std::string& col = table.header[c];
    if (!col.ends_with("_mean")) throw ConfigError(fmt::format("{}: unexpected column '{}'", path.string(), col));
    labels.push_back(col.substr(0, col.size() - 5));
  }
  std::vector<EvalReport> out;
  for (const auto& row : table.rows) {
    EvalReport r;
    r.method = row[0];
    r.target = row[1];
    r.n_shots = parse_count(row[2], path);
    r.seed_count = parse_count(row[3], path);
    r.macro_mean = parse_double(row[4], path);
    r.macro_std = parse_double(row[5], path);
    for (std::size_t l = 0; l < labels.size(); ++l) {
      r.per_label.push_back({labels[l], parse_double(row[kFixed.size() + 2 * l], path),
                             parse_double(row[kFixed.size() + 2 * l + 1], path)});
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace mdl
