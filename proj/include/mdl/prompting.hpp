// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

// Pattern-verbalizer pairs: turning texts into masked prompts and mask-position
// token distributions into label scores.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mdl {

using TokenId = std::int32_t;

class ModelBackend;

/// Word-level view of a backend tokenizer.
class SubwordTokenizer {
 public:
  virtual ~SubwordTokenizer() = default;
  /// Subword ids of a single word; an unknown word yields the unknown id.
  virtual std::vector<TokenId> tokenize(std::string_view word) const = 0;
  virtual bool is_unknown(TokenId id) const = 0;
};

/// Template with exactly one {text} and one {mask} slot, {text} first.
class Pattern {
 public:
  static constexpr std::string_view kTextSlot = "{text}";
  static constexpr std::string_view kMaskSlot = "{mask}";

  /// Throws ConfigError when the slot invariants do not hold.
  explicit Pattern(std::string tmpl);

  /// "{text} It was {mask}"
  static Pattern classification();
  /// "{text} It was targeted at {mask}"
  static Pattern target_identification();

  const std::string& str() const { return template_; }
  bool operator==(const Pattern&) const = default;

 private:
  std::string template_;
};

struct PromptedText {
  std::string text;
  /// Byte offset and length of the mask token inside `text`.
  std::size_t mask_offset = 0;
  std::size_t mask_length = 0;
};

/// Substitutes the template slots positionally; the input text is never scanned
/// for placeholders. Throws ConfigError on empty (all-whitespace) text.
PromptedText apply_pattern(std::string_view text, const Pattern& pattern, std::string_view mask_token);

/// Label to surface-word map, kept in the owning dataset's label order.
class Verbalizer {
 public:
  Verbalizer() = default;
  /// Throws ConfigError on duplicate labels, duplicate words, or words that are
  /// empty or contain whitespace.
  explicit Verbalizer(std::vector<std::pair<std::string, std::string>> entries);

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  std::vector<std::string> labels() const;
  std::size_t size() const { return entries_.size(); }
  const std::string& word_for(std::string_view label) const;
  bool contains(std::string_view label) const;

  /// Same words for the listed labels, in the given order.
  Verbalizer restricted_to(std::span<const std::string> labels) const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

struct Pvp {
  std::string id;
  Pattern pattern = Pattern::classification();
  Verbalizer verbalizer;
};

/// Subword ids per label, parallel to `labels`.
struct LabelSubwords {
  std::vector<std::string> labels;
  std::vector<std::vector<TokenId>> subwords;

  std::size_t index_of(std::string_view label) const;
};

/// Throws ConfigError naming label and word when a word maps to the unknown token.
LabelSubwords verbalizer_subwords(const Verbalizer& verbalizer, const SubwordTokenizer& tokenizer);

struct LabelScores {
  std::vector<std::string> labels;
  /// Mean mask-position probability over each label's subwords.
  std::vector<double> scores;
  /// scores / sum(scores).
  std::vector<double> normalized;

  /// First maximum in label order.
  std::size_t argmax() const;
  double score(std::string_view label) const;
  double normalized_score(std::string_view label) const;
};

/// Accepts any nonnegative finite weights; a proper distribution is the normal
/// input. Throws TrainingError when every label score is zero.
LabelScores score_labels(std::span<const double> mask_probs, const LabelSubwords& label_subwords);

/// Cross-entropy of normalized label scores against `gold` and its gradient with
/// respect to the mask-position probabilities.
struct LabelObjective {
  double loss = 0.0;
  std::vector<std::pair<TokenId, double>> grad_probs;
};
LabelObjective label_cross_entropy(std::span<const double> mask_probs, const LabelSubwords& label_subwords,
                                   std::size_t gold);

/// Prompted prediction with first-label tie-breaking.
std::string predict(std::string_view text, const Pvp& pvp, const LabelSubwords& label_subwords,
                    const ModelBackend& backend);
std::size_t predict_index(std::string_view text, const Pvp& pvp, const LabelSubwords& label_subwords,
                          const ModelBackend& backend);

}  // namespace mdl
