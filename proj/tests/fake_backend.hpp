// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mdl/backend.hpp"
#include "mdl/errors.hpp"

namespace mdl::testing {

/// Tokenizer over an explicit word -> subword-id table.
class TableTokenizer : public SubwordTokenizer {
 public:
  explicit TableTokenizer(std::map<std::string, std::vector<TokenId>> table) : table_(std::move(table)) {}
  std::vector<TokenId> tokenize(std::string_view word) const override {
    const auto it = table_.find(std::string(word));
    return it == table_.end() ? std::vector<TokenId>{0} : it->second;
  }
  bool is_unknown(TokenId id) const override { return id == 0; }

 private:
  std::map<std::string, std::vector<TokenId>> table_;
};

/// Returns a fixed mask distribution; training is a no-op.
class FixedBackend final : public ModelBackend {
 public:
  FixedBackend(std::map<std::string, std::vector<TokenId>> table, std::vector<double> distribution)
      : tokenizer_(std::move(table)), distribution_(std::move(distribution)) {}

  std::vector<TokenId> tokenize(std::string_view word) const override { return tokenizer_.tokenize(word); }
  bool is_unknown(TokenId id) const override { return id == 0; }
  std::string id() const override { return "fixed"; }
  std::string_view mask_token() const override { return "[MASK]"; }
  std::size_t vocab_size() const override { return distribution_.size(); }
  std::vector<double> mask_distribution(std::string_view prompted) const override {
    last_prompt = std::string(prompted);
    return distribution_;
  }
  double accumulate_label(const LabelExample&, double) override { return 0.0; }
  MlmOutcome accumulate_mlm(std::string_view, double) override { return {}; }
  void apply_update(double, double) override {}
  void reset_optimizer() override {}
  void set_seed(std::uint64_t) override {}
  void set_dropout(double) override {}
  Snapshot snapshot() const override {
    return Snapshot{"fixed", 0, std::make_shared<const std::vector<double>>(distribution_)};
  }
  void restore(const Snapshot&) override {}
  std::unique_ptr<ModelBackend> clone() const override { return std::make_unique<FixedBackend>(*this); }

  mutable std::string last_prompt;

 private:
  TableTokenizer tokenizer_;
  std::vector<double> distribution_;
};

}  // namespace mdl::testing
