// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

#include "mdl/sampler.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <set>

#include "mdl/delimited.hpp"
#include "mdl/errors.hpp"
#include "mdl/random.hpp"

namespace mdl {
namespace {

std::vector<std::vector<std::size_t>> indices_by_label(std::span<const Sample> samples,
                                                       std::span<const std::string> labels) {
  std::vector<std::vector<std::size_t>> out(labels.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto it = std::find(labels.begin(), labels.end(), samples[i].label);
    if (it == labels.end()) throw ConfigError(fmt::format("sample label '{}' is not in the label set", samples[i].label));
    out[static_cast<std::size_t>(it - labels.begin())].push_back(i);
  }
  return out;
}

std::vector<std::size_t> draw_without_replacement(std::vector<std::size_t> candidates, std::size_t count, Rng& rng) {
  // Partial Fisher-Yates.
  count = std::min(count, candidates.size());
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.uniform_index(candidates.size() - i);
    std::swap(candidates[i], candidates[j]);
  }
  candidates.resize(count);
  return candidates;
}

}  // namespace

void FewShotPlan::validate() const {
  if (n_per_label < 1) throw ConfigError("n_per_label must be at least 1");
  if (valid_size < 1) throw ConfigError("valid_size must be at least 1");
}

Draw sample_few_shot(std::span<const Sample> train, std::span<const std::string> labels, const FewShotPlan& plan) {
  plan.validate();
  if (train.empty()) throw ConfigError("cannot draw shots from an empty training split");
  const auto by_label = indices_by_label(train, labels);
  Draw out;
  for (std::size_t l = 0; l < labels.size(); ++l) {
    if (by_label[l].empty()) throw ConfigError(fmt::format("label '{}' has no training samples", labels[l]));
    Rng rng(derive_seed(plan.seed, "shots:" + labels[l]));
    if (by_label[l].size() < plan.n_per_label) {
      out.warnings.push_back(fmt::format("label '{}' has only {} training samples, fewer than n={}", labels[l],
                                         by_label[l].size(), plan.n_per_label));
    }
    for (std::size_t i : draw_without_replacement(by_label[l], plan.n_per_label, rng)) out.samples.push_back(train[i]);
  }
  return out;
}

std::vector<std::size_t> largest_remainder_quotas(std::span<const std::size_t> counts, std::size_t total) {
  std::size_t sum = 0;
  for (std::size_t c : counts) sum += c;
  std::vector<std::size_t> quotas(counts.size(), 0);
  if (sum == 0) return quotas;
  std::vector<std::size_t> remainders(counts.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    // Integer arithmetic keeps remainder comparisons exact.
    const std::size_t scaled = total * counts[i];
    quotas[i] = scaled / sum;
    remainders[i] = scaled % sum;
    assigned += quotas[i];
  }
  std::vector<std::size_t> order(counts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++quotas[order[k % order.size()]];
  return quotas;
}

Draw sample_validation(std::span<const Sample> pool, std::span<const Sample> full_train,
                       std::span<const std::string> labels, const FewShotPlan& plan) {
  plan.validate();
  Draw out;
  if (pool.empty()) {
    out.warnings.push_back("validation pool is empty");
    return out;
  }
  const auto pool_by_label = indices_by_label(pool, labels);
  const auto train_by_label = indices_by_label(full_train, labels);

  std::vector<std::size_t> counts;
  for (const auto& idx : train_by_label) counts.push_back(idx.size());
  auto quotas = largest_remainder_quotas(counts, plan.valid_size);

  const std::size_t target = std::min(plan.valid_size, pool.size());
  if (pool.size() < plan.valid_size) {
    out.warnings.push_back(
        fmt::format("validation pool has {} samples, fewer than valid_size={}", pool.size(), plan.valid_size));
  }

  std::size_t total = 0;
  for (std::size_t l = 0; l < labels.size(); ++l) {
    quotas[l] = std::min(quotas[l], pool_by_label[l].size());
    total += quotas[l];
  }
  // Redistribute shortfall one sample at a time to the label furthest below its
  // ideal share that still has spare samples.
  while (total < target) {
    std::size_t best = labels.size();
    double best_gap = 0.0;
    for (std::size_t l = 0; l < labels.size(); ++l) {
      if (quotas[l] >= pool_by_label[l].size()) continue;
      const double ideal = static_cast<double>(plan.valid_size) * static_cast<double>(counts[l]) /
                           static_cast<double>(full_train.size());
      const double gap = ideal - static_cast<double>(quotas[l]);
      if (best == labels.size() || gap > best_gap) {
        best = l;
        best_gap = gap;
      }
    }
    ++quotas[best];
    ++total;
  }

  for (std::size_t l = 0; l < labels.size(); ++l) {
    Rng rng(derive_seed(plan.seed, "valid:" + labels[l]));
    for (std::size_t i : draw_without_replacement(pool_by_label[l], quotas[l], rng)) out.samples.push_back(pool[i]);
  }
  return out;
}

std::vector<Sample> remaining_pool(std::span<const Sample> train, std::span<const Sample> drawn) {
  std::set<std::size_t> taken;
  for (const auto& s : drawn) taken.insert(s.uid);
  std::vector<Sample> out;
  for (const auto& s : train) {
    if (!taken.contains(s.uid)) out.push_back(s);
  }
  return out;
}

void write_draw(const std::filesystem::path& path, std::span<const Sample> samples) {
  Table table;
  table.header = {"uid", "label", "text"};
  for (const auto& s : samples) {
    std::string text = s.text;
    std::replace_if(text.begin(), text.end(), [](char c) { return c == '\t' || c == '\n' || c == '\r'; }, ' ');
    table.rows.push_back({std::to_string(s.uid), s.label, std::move(text)});
  }
  write_file_atomic(path, format_delimited(table, '\t'));
}

}  // namespace mdl
