// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

#include "mdl/prompting.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "mdl/backend.hpp"
#include "mdl/errors.hpp"

namespace mdl {
namespace {

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t count = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++count;
  }
  return count;
}

bool is_blank(std::string_view text) {
  return std::all_of(text.begin(), text.end(),
                     [](unsigned char c) { return c == ' ' || (c >= '\t' && c <= '\r'); });
}

}  // namespace

Pattern::Pattern(std::string tmpl) : template_(std::move(tmpl)) {
  if (count_occurrences(template_, kTextSlot) != 1 || count_occurrences(template_, kMaskSlot) != 1) {
    throw ConfigError(fmt::format("pattern '{}' must contain {} and {} exactly once", template_,
                                  kTextSlot, kMaskSlot));
  }
  if (!template_.starts_with(kTextSlot)) {
    throw ConfigError(fmt::format("pattern '{}' must start with {}", template_, kTextSlot));
  }
}

Pattern Pattern::classification() { return Pattern("{text} It was {mask}"); }

Pattern Pattern::target_identification() { return Pattern("{text} It was targeted at {mask}"); }

PromptedText apply_pattern(std::string_view text, const Pattern& pattern, std::string_view mask_token) {
  if (text.empty() || is_blank(text)) throw ConfigError("cannot prompt an empty text");
  const std::string& tmpl = pattern.str();
  // {text} is the template prefix, so the remainder only holds the mask slot.
  const std::string_view rest = std::string_view(tmpl).substr(Pattern::kTextSlot.size());
  const std::size_t mask_in_rest = rest.find(Pattern::kMaskSlot);

  PromptedText out;
  out.text.reserve(text.size() + rest.size() + mask_token.size());
  out.text.append(text);
  out.text.append(rest.substr(0, mask_in_rest));
  out.mask_offset = out.text.size();
  out.mask_length = mask_token.size();
  out.text.append(mask_token);
  out.text.append(rest.substr(mask_in_rest + Pattern::kMaskSlot.size()));
  return out;
}

Verbalizer::Verbalizer(std::vector<std::pair<std::string, std::string>> entries)
    : entries_(std::move(entries)) {
  std::set<std::string> labels;
  std::set<std::string> words;
  for (const auto& [label, word] : entries_) {
    if (!labels.insert(label).second) throw ConfigError(fmt::format("verbalizer lists label '{}' twice", label));
    if (word.empty() || std::any_of(word.begin(), word.end(), [](unsigned char c) { return std::isspace(c); })) {
      throw ConfigError(fmt::format("verbalizer word '{}' for label '{}' must be a single word", word, label));
    }
    if (!words.insert(word).second) {
      throw ConfigError(fmt::format("verbalizer word '{}' is used by more than one label", word));
    }
  }
}

std::vector<std::string> Verbalizer::labels() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& entry : entries_) out.push_back(entry.first);
  return out;
}

const std::string& Verbalizer::word_for(std::string_view label) const {
  for (const auto& [l, w] : entries_) {
    if (l == label) return w;
  }
  throw ConfigError(fmt::format("verbalizer has no entry for label '{}'", label));
}

bool Verbalizer::contains(std::string_view label) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == label; });
}

Verbalizer Verbalizer::restricted_to(std::span<const std::string> labels) const {
  std::vector<std::pair<std::string, std::string>> kept;
  for (const auto& label : labels) kept.emplace_back(label, word_for(label));
  return Verbalizer(std::move(kept));
}

std::size_t LabelSubwords::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) return i;
  }
  throw ConfigError(fmt::format("label '{}' is not in the label set", label));
}

LabelSubwords verbalizer_subwords(const Verbalizer& verbalizer, const SubwordTokenizer& tokenizer) {
  LabelSubwords out;
  for (const auto& [label, word] : verbalizer.entries()) {
    auto ids = tokenizer.tokenize(word);
    if (ids.empty() || std::any_of(ids.begin(), ids.end(), [&](TokenId id) { return tokenizer.is_unknown(id); })) {
      throw ConfigError(fmt::format("verbalizer word '{}' for label '{}' has no known subwords", word, label));
    }
    out.labels.push_back(label);
    out.subwords.push_back(std::move(ids));
  }
  return out;
}

std::size_t LabelScores::argmax() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

double LabelScores::score(std::string_view label) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) return scores[i];
  }
  throw ConfigError(fmt::format("no score for label '{}'", label));
}

double LabelScores::normalized_score(std::string_view label) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) return normalized[i];
  }
  throw ConfigError(fmt::format("no score for label '{}'", label));
}

LabelScores score_labels(std::span<const double> mask_probs, const LabelSubwords& label_subwords) {
  LabelScores out;
  out.labels = label_subwords.labels;
  out.scores.reserve(label_subwords.labels.size());
  double total = 0.0;
  for (const auto& ids : label_subwords.subwords) {
    double sum = 0.0;
    for (TokenId id : ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= mask_probs.size()) {
        throw TrainingError(fmt::format("subword id {} outside the distribution of size {}", id, mask_probs.size()));
      }
      const double p = mask_probs[static_cast<std::size_t>(id)];
      if (!std::isfinite(p) || p < 0.0) throw TrainingError(fmt::format("invalid mask probability {}", p));
      sum += p;
    }
    const double mean = sum / static_cast<double>(ids.size());
    out.scores.push_back(mean);
    total += mean;
  }
  if (!(total > 0.0)) throw TrainingError("degenerate backend output: every label score is zero");
  out.normalized.reserve(out.scores.size());
  for (double s : out.scores) out.normalized.push_back(s / total);
  return out;
}

LabelObjective label_cross_entropy(std::span<const double> mask_probs, const LabelSubwords& label_subwords,
                                   std::size_t gold) {
  const LabelScores scores = score_labels(mask_probs, label_subwords);
  double total = 0.0;
  for (double s : scores.scores) total += s;

  LabelObjective out;
  out.loss = -std::log(scores.normalized[gold]);

  // loss = -log s_gold + log sum_l s_l, with s_l the mean of p over label l's subwords.
  std::vector<std::pair<TokenId, double>> grads;
  for (std::size_t l = 0; l < label_subwords.subwords.size(); ++l) {
    const auto& ids = label_subwords.subwords[l];
    const double k = static_cast<double>(ids.size());
    double coef = 1.0 / (k * total);
    if (l == gold) coef -= 1.0 / (k * scores.scores[l]);
    for (TokenId id : ids) grads.emplace_back(id, coef);
  }
  std::sort(grads.begin(), grads.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& g : grads) {
    if (!out.grad_probs.empty() && out.grad_probs.back().first == g.first) {
      out.grad_probs.back().second += g.second;
    } else {
      out.grad_probs.push_back(g);
    }
  }
  return out;
}

std::size_t predict_index(std::string_view text, const Pvp& pvp, const LabelSubwords& label_subwords,
                          const ModelBackend& backend) {
  const PromptedText prompt = apply_pattern(text, pvp.pattern, backend.mask_token());
  const std::vector<double> probs = backend.mask_distribution(prompt.text);
  return score_labels(probs, label_subwords).argmax();
}

std::string predict(std::string_view text, const Pvp& pvp, const LabelSubwords& label_subwords,
                    const ModelBackend& backend) {
  return label_subwords.labels[predict_index(text, pvp, label_subwords, backend)];
}

}  // namespace mdl
