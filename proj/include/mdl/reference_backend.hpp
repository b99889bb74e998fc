// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

// A small trainable masked LM: word-piece vocabulary, dim-32 embeddings,
// mean-pooled tanh context encoder, vocabulary projection and softmax.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mdl/backend.hpp"
#include "mdl/random.hpp"

namespace mdl {

class Corpus;

/// Lowercases ASCII letters and strips surrounding ASCII punctuation.
std::string normalize_word(std::string_view word);

class WordPieceVocabulary {
 public:
  static constexpr std::string_view kUnknown = "[UNK]";
  static constexpr std::string_view kMask = "[MASK]";
  static constexpr std::string_view kContinuation = "##";

  /// Special tokens are placed first (ids 0 and 1); duplicates are dropped.
  explicit WordPieceVocabulary(std::vector<std::string> tokens);

  /// Whole normalized words seen at least `min_count` times, sorted.
  static WordPieceVocabulary from_texts(std::span<const std::string> texts, std::size_t min_count = 1);

  TokenId unknown_id() const { return 0; }
  TokenId mask_id() const { return 1; }
  TokenId find(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  std::uint64_t hash() const { return hash_; }

  /// Greedy longest-match word pieces; [UNK] when the word cannot be covered.
  std::vector<TokenId> tokenize_word(std::string_view word) const;
  /// Whitespace split; a chunk equal to [MASK] maps to the mask id.
  std::vector<TokenId> tokenize_text(std::string_view text) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::uint64_t hash_ = 0;
};

/// Every word of every sample, pattern and verbalizer in the corpus.
WordPieceVocabulary vocabulary_from_corpus(const Corpus& corpus, std::size_t min_count = 1);

struct ReferenceBackendOptions {
  std::size_t dim = 32;
  std::uint64_t init_seed = 0;
  double dropout = 0.1;
};

class ReferenceBackend final : public ModelBackend {
 public:
  ReferenceBackend(WordPieceVocabulary vocabulary, ReferenceBackendOptions options = {});

  std::string id() const override;
  std::string_view mask_token() const override { return WordPieceVocabulary::kMask; }
  std::size_t vocab_size() const override { return vocab_.size(); }
  std::vector<TokenId> tokenize(std::string_view word) const override { return vocab_.tokenize_word(word); }
  bool is_unknown(TokenId id) const override { return id == vocab_.unknown_id(); }

  std::vector<double> mask_distribution(std::string_view prompted) const override;
  double accumulate_label(const LabelExample& example, double weight) override;
  MlmOutcome accumulate_mlm(std::string_view text, double weight) override;
  void apply_update(double learning_rate, double grad_scale) override;
  void reset_optimizer() override;
  void set_seed(std::uint64_t seed) override;
  void set_dropout(double rate) override;

  Snapshot snapshot() const override;
  void restore(const Snapshot& snapshot) override;
  std::unique_ptr<ModelBackend> clone() const override;

  const WordPieceVocabulary& vocabulary() const { return vocab_; }
  std::size_t parameter_count() const { return params_.size(); }
  std::span<const double> parameters() const { return params_; }
  std::span<double> mutable_parameters() { return params_; }

  /// Label loss and its full parameter gradient with dropout disabled.
  std::pair<double, std::vector<double>> label_loss_and_gradient(const LabelExample& example) const;
  /// Label loss with dropout disabled.
  double label_loss(const LabelExample& example) const;

  /// Number of positions masked for a text of `subwords` subwords.
  static std::size_t mlm_mask_count(std::size_t subwords);

 private:
  struct Activations {
    std::vector<TokenId> context;
    std::vector<double> keep_scale;  // dropout multipliers, empty when disabled
    std::vector<double> pooled;      // after dropout
    std::vector<double> hidden;
    std::vector<double> probs;
  };

  std::vector<TokenId> context_without_mask(std::string_view prompted) const;
  Activations forward(std::vector<TokenId> context, bool train);
  Activations forward_eval(std::vector<TokenId> context) const;
  void run_forward(Activations& act) const;
  void backward(const Activations& act, std::span<const double> dlogits, double weight, std::span<double> grad) const;
  std::vector<double> label_dlogits(const Activations& act, const LabelExample& example, double& loss) const;

  std::size_t embed_offset() const { return 0; }
  std::size_t encoder_offset() const { return vocab_.size() * dim_; }
  std::size_t encoder_bias_offset() const { return encoder_offset() + dim_ * dim_; }
  std::size_t output_offset() const { return encoder_bias_offset() + dim_; }
  std::size_t output_bias_offset() const { return output_offset() + vocab_.size() * dim_; }

  WordPieceVocabulary vocab_;
  std::size_t dim_;
  std::uint64_t init_seed_;
  double dropout_;
  std::uint64_t seed_;
  Rng rng_;

  std::vector<double> params_;
  std::vector<double> grad_;
  std::vector<double> adam_m_;
  std::vector<double> adam_v_;
  std::size_t adam_steps_ = 0;
};

}  // namespace mdl
