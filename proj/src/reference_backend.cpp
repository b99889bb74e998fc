// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

#include "mdl/reference_backend.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>

#include "mdl/corpus.hpp"
#include "mdl/errors.hpp"

namespace mdl {
namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEpsilon = 1e-8;
constexpr double kOutputInitScale = 0.01;

std::vector<std::string_view> split_whitespace(std::string_view text) {
  std::vector<std::string_view> chunks;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) chunks.push_back(text.substr(start, i - start));
  }
  return chunks;
}

}  // namespace

std::string normalize_word(std::string_view word) {
  auto is_punct = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; };
  while (!word.empty() && is_punct(word.front())) word.remove_prefix(1);
  while (!word.empty() && is_punct(word.back())) word.remove_suffix(1);
  std::string out(word);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

WordPieceVocabulary::WordPieceVocabulary(std::vector<std::string> tokens) {
  tokens_.emplace_back(kUnknown);
  tokens_.emplace_back(kMask);
  for (auto& t : tokens) {
    if (t.empty() || t == kUnknown || t == kMask) continue;
    tokens_.push_back(std::move(t));
  }
  std::uint64_t h = fnv1a("wordpiece-v1");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw ConfigError(fmt::format("vocabulary lists token '{}' twice", tokens_[i]));
    }
    h = fnv1a(tokens_[i], h);
    h = fnv1a("\n", h);
  }
  hash_ = h;
}

WordPieceVocabulary WordPieceVocabulary::from_texts(std::span<const std::string> texts, std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  for (const auto& text : texts) {
    for (auto chunk : split_whitespace(text)) {
      if (chunk == kMask) continue;
      std::string word = normalize_word(chunk);
      if (!word.empty()) ++counts[word];
    }
  }
  std::vector<std::string> tokens;
  for (auto& [word, count] : counts) {
    if (count >= min_count) tokens.push_back(word);
  }
  return WordPieceVocabulary(std::move(tokens));
}

TokenId WordPieceVocabulary::find(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? -1 : it->second;
}

std::vector<TokenId> WordPieceVocabulary::tokenize_word(std::string_view word) const {
  const std::string normalized = normalize_word(word);
  if (normalized.empty()) return {};
  std::vector<TokenId> pieces;
  std::size_t start = 0;
  while (start < normalized.size()) {
    TokenId match = -1;
    std::size_t end = normalized.size();
    for (; end > start; --end) {
      std::string candidate = normalized.substr(start, end - start);
      if (start > 0) candidate.insert(0, kContinuation);
      match = find(candidate);
      if (match >= 0) break;
    }
    if (match < 0) return {unknown_id()};
    pieces.push_back(match);
    start = end;
  }
  return pieces;
}

std::vector<TokenId> WordPieceVocabulary::tokenize_text(std::string_view text) const {
  std::vector<TokenId> ids;
  for (auto chunk : split_whitespace(text)) {
    if (chunk == kMask) {
      ids.push_back(mask_id());
      continue;
    }
    for (TokenId id : tokenize_word(chunk)) ids.push_back(id);
  }
  return ids;
}

WordPieceVocabulary vocabulary_from_corpus(const Corpus& corpus, std::size_t min_count) {
  std::vector<std::string> texts;
  for (const auto& d : corpus.datasets()) {
    for (const auto* split : {&d.samples.train, &d.samples.valid, &d.samples.test}) {
      for (const auto& s : *split) texts.push_back(s.text);
    }
  }
  // Pattern and verbalizer words are always in vocabulary, whatever min_count is.
  std::set<std::string> required;
  for (const auto& d : corpus.datasets()) {
    for (auto chunk : split_whitespace(d.pvp.pattern.str())) {
      if (chunk == Pattern::kTextSlot || chunk == Pattern::kMaskSlot) continue;
      required.insert(normalize_word(chunk));
    }
    for (const auto& [label, word] : d.pvp.verbalizer.entries()) required.insert(normalize_word(word));
  }
  const WordPieceVocabulary base = WordPieceVocabulary::from_texts(texts, min_count);
  std::set<std::string> all(required.begin(), required.end());
  for (std::size_t i = 2; i < base.size(); ++i) all.insert(base.token(static_cast<TokenId>(i)));
  all.erase("");
  return WordPieceVocabulary(std::vector<std::string>(all.begin(), all.end()));
}

ReferenceBackend::ReferenceBackend(WordPieceVocabulary vocabulary, ReferenceBackendOptions options)
    : vocab_(std::move(vocabulary)),
      dim_(options.dim),
      init_seed_(options.init_seed),
      dropout_(options.dropout),
      seed_(options.init_seed),
      rng_(derive_seed(options.init_seed, "dropout")) {
  if (dim_ == 0) throw ConfigError("reference backend dimension must be positive");
  set_dropout(options.dropout);
  const std::size_t v = vocab_.size();
  params_.assign(output_bias_offset() + v, 0.0);
  Rng init(derive_seed(init_seed_, "init"));
  const double encoder_scale = 1.0 / std::sqrt(static_cast<double>(dim_));
  for (std::size_t i = 0; i < v * dim_; ++i) params_[embed_offset() + i] = init.normal();
  for (std::size_t i = 0; i < dim_ * dim_; ++i) params_[encoder_offset() + i] = encoder_scale * init.normal();
  for (std::size_t i = 0; i < v * dim_; ++i) params_[output_offset() + i] = kOutputInitScale * init.normal();
  grad_.assign(params_.size(), 0.0);
  reset_optimizer();
}

std::string ReferenceBackend::id() const {
  return fmt::format("reference-v1;dim={};vocab={}:{:016x};init={}", dim_, vocab_.size(), vocab_.hash(), init_seed_);
}

std::vector<TokenId> ReferenceBackend::context_without_mask(std::string_view prompted) const {
  std::vector<TokenId> ids = vocab_.tokenize_text(prompted);
  const auto masks = std::count(ids.begin(), ids.end(), vocab_.mask_id());
  if (masks != 1) {
    throw ConfigError(fmt::format("prompt must contain exactly one {} token, found {}: '{}'", mask_token(), masks,
                                  prompted.substr(0, 80)));
  }
  ids.erase(std::remove(ids.begin(), ids.end(), vocab_.mask_id()), ids.end());
  return ids;
}

void ReferenceBackend::run_forward(Activations& act) const {
  const std::size_t d = dim_;
  const std::size_t v = vocab_.size();
  act.pooled.assign(d, 0.0);
  if (!act.context.empty()) {
    for (TokenId t : act.context) {
      const double* row = &params_[embed_offset() + static_cast<std::size_t>(t) * d];
      for (std::size_t k = 0; k < d; ++k) act.pooled[k] += row[k];
    }
    const double inv = 1.0 / static_cast<double>(act.context.size());
    for (double& x : act.pooled) x *= inv;
  }
  if (!act.keep_scale.empty()) {
    for (std::size_t k = 0; k < d; ++k) act.pooled[k] *= act.keep_scale[k];
  }
  act.hidden.assign(d, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    const double* w = &params_[encoder_offset() + r * d];
    double a = params_[encoder_bias_offset() + r];
    for (std::size_t k = 0; k < d; ++k) a += w[k] * act.pooled[k];
    act.hidden[r] = std::tanh(a);
  }
  act.probs.assign(v, 0.0);
  double max_logit = -INFINITY;
  for (std::size_t u = 0; u < v; ++u) {
    const double* o = &params_[output_offset() + u * d];
    double z = params_[output_bias_offset() + u];
    for (std::size_t k = 0; k < d; ++k) z += o[k] * act.hidden[k];
    act.probs[u] = z;
    max_logit = std::max(max_logit, z);
  }
  double total = 0.0;
  for (double& p : act.probs) {
    p = std::exp(p - max_logit);
    total += p;
  }
  for (double& p : act.probs) p /= total;
}

ReferenceBackend::Activations ReferenceBackend::forward_eval(std::vector<TokenId> context) const {
  Activations act;
  act.context = std::move(context);
  run_forward(act);
  return act;
}

ReferenceBackend::Activations ReferenceBackend::forward(std::vector<TokenId> context, bool train) {
  Activations act;
  act.context = std::move(context);
  if (train && dropout_ > 0.0) {
    act.keep_scale.resize(dim_);
    const double keep = 1.0 - dropout_;
    for (double& s : act.keep_scale) s = rng_.uniform() < dropout_ ? 0.0 : 1.0 / keep;
  }
  run_forward(act);
  return act;
}

void ReferenceBackend::backward(const Activations& act, std::span<const double> dlogits, double weight,
                                std::span<double> grad) const {
  const std::size_t d = dim_;
  const std::size_t v = vocab_.size();
  std::vector<double> dhidden(d, 0.0);
  for (std::size_t u = 0; u < v; ++u) {
    const double dz = weight * dlogits[u];
    if (dz == 0.0) continue;
    grad[output_bias_offset() + u] += dz;
    double* go = &grad[output_offset() + u * d];
    const double* o = &params_[output_offset() + u * d];
    for (std::size_t k = 0; k < d; ++k) {
      go[k] += dz * act.hidden[k];
      dhidden[k] += dz * o[k];
    }
  }
  std::vector<double> dpooled(d, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    const double da = dhidden[r] * (1.0 - act.hidden[r] * act.hidden[r]);
    grad[encoder_bias_offset() + r] += da;
    double* gw = &grad[encoder_offset() + r * d];
    const double* w = &params_[encoder_offset() + r * d];
    for (std::size_t k = 0; k < d; ++k) {
      gw[k] += da * act.pooled[k];
      dpooled[k] += da * w[k];
    }
  }
  if (act.context.empty()) return;
  if (!act.keep_scale.empty()) {
    for (std::size_t k = 0; k < d; ++k) dpooled[k] *= act.keep_scale[k];
  }
  const double inv = 1.0 / static_cast<double>(act.context.size());
  for (TokenId t : act.context) {
    double* ge = &grad[embed_offset() + static_cast<std::size_t>(t) * d];
    for (std::size_t k = 0; k < d; ++k) ge[k] += inv * dpooled[k];
  }
}

std::vector<double> ReferenceBackend::label_dlogits(const Activations& act, const LabelExample& example,
                                                    double& loss) const {
  if (example.label_subwords == nullptr) throw TrainingError("label example without verbalizer subwords");
  const LabelObjective objective = label_cross_entropy(act.probs, *example.label_subwords, example.gold);
  loss = objective.loss;
  // Softmax Jacobian: dL/dz_u = p_u * (g_u - sum_v p_v g_v).
  double inner = 0.0;
  for (const auto& [id, g] : objective.grad_probs) inner += act.probs[static_cast<std::size_t>(id)] * g;
  std::vector<double> dlogits(act.probs.size());
  for (std::size_t u = 0; u < act.probs.size(); ++u) dlogits[u] = -act.probs[u] * inner;
  for (const auto& [id, g] : objective.grad_probs) {
    dlogits[static_cast<std::size_t>(id)] += act.probs[static_cast<std::size_t>(id)] * g;
  }
  return dlogits;
}

std::vector<double> ReferenceBackend::mask_distribution(std::string_view prompted) const {
  return forward_eval(context_without_mask(prompted)).probs;
}

double ReferenceBackend::accumulate_label(const LabelExample& example, double weight) {
  const Activations act = forward(context_without_mask(example.prompted), /*train=*/true);
  double loss = 0.0;
  const std::vector<double> dlogits = label_dlogits(act, example, loss);
  backward(act, dlogits, weight, grad_);
  return loss;
}

std::pair<double, std::vector<double>> ReferenceBackend::label_loss_and_gradient(const LabelExample& example) const {
  const Activations act = forward_eval(context_without_mask(example.prompted));
  double loss = 0.0;
  const std::vector<double> dlogits = label_dlogits(act, example, loss);
  std::vector<double> grad(params_.size(), 0.0);
  backward(act, dlogits, 1.0, grad);
  return {loss, std::move(grad)};
}

double ReferenceBackend::label_loss(const LabelExample& example) const {
  const Activations act = forward_eval(context_without_mask(example.prompted));
  return label_cross_entropy(act.probs, *example.label_subwords, example.gold).loss;
}

std::size_t ReferenceBackend::mlm_mask_count(std::size_t subwords) {
  if (subwords == 0) return 0;
  return std::max<std::size_t>(1, (subwords * 15 + 99) / 100);
}

MlmOutcome ReferenceBackend::accumulate_mlm(std::string_view text, double weight) {
  const std::vector<TokenId> ids = vocab_.tokenize_text(text);
  if (ids.empty()) throw ConfigError(fmt::format("text '{}' has no subwords to mask", text.substr(0, 80)));
  const std::size_t k = mlm_mask_count(ids.size());

  std::vector<std::size_t> positions(ids.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
  for (std::size_t i = 0; i < k; ++i) std::swap(positions[i], positions[i + rng_.uniform_index(ids.size() - i)]);
  positions.resize(k);
  std::sort(positions.begin(), positions.end());

  std::vector<TokenId> context;
  std::size_t next = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (next < positions.size() && positions[next] == i) {
      ++next;
      continue;
    }
    context.push_back(ids[i]);
  }
  // The bag-of-words encoder gives every masked position the same context vector.
  const Activations act = forward(std::move(context), /*train=*/true);
  MlmOutcome out;
  std::vector<double> dlogits = act.probs;
  const double share = 1.0 / static_cast<double>(k);
  for (std::size_t pos : positions) {
    const auto target = static_cast<std::size_t>(ids[pos]);
    out.loss -= share * std::log(act.probs[target]);
    dlogits[target] -= share;
  }
  backward(act, dlogits, weight, grad_);
  out.masked_positions = std::move(positions);
  return out;
}

void ReferenceBackend::apply_update(double learning_rate, double grad_scale) {
  ++adam_steps_;
  const double correction1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(adam_steps_));
  const double correction2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(adam_steps_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const double g = grad_[i] * grad_scale;
    adam_m_[i] = kAdamBeta1 * adam_m_[i] + (1.0 - kAdamBeta1) * g;
    adam_v_[i] = kAdamBeta2 * adam_v_[i] + (1.0 - kAdamBeta2) * g * g;
    const double m_hat = adam_m_[i] / correction1;
    const double v_hat = adam_v_[i] / correction2;
    params_[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + kAdamEpsilon);
  }
  std::fill(grad_.begin(), grad_.end(), 0.0);
}

void ReferenceBackend::reset_optimizer() {
  adam_m_.assign(params_.size(), 0.0);
  adam_v_.assign(params_.size(), 0.0);
  adam_steps_ = 0;
  std::fill(grad_.begin(), grad_.end(), 0.0);
}

void ReferenceBackend::set_seed(std::uint64_t seed) {
  seed_ = seed;
  rng_ = Rng(derive_seed(seed, "dropout"));
}

void ReferenceBackend::set_dropout(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  dropout_ = rate;
}

Snapshot ReferenceBackend::snapshot() const {
  return Snapshot{id(), seed_, std::make_shared<const std::vector<double>>(params_)};
}

void ReferenceBackend::restore(const Snapshot& snapshot) {
  if (snapshot.backend_id != id()) {
    throw ConfigError(fmt::format("snapshot from '{}' cannot be restored into '{}'", snapshot.backend_id, id()));
  }
  if (!snapshot.parameters || snapshot.parameters->size() != params_.size()) {
    throw ConfigError("snapshot parameter count does not match the backend");
  }
  params_ = *snapshot.parameters;
  seed_ = snapshot.seed;
  std::fill(grad_.begin(), grad_.end(), 0.0);
}

std::unique_ptr<ModelBackend> ReferenceBackend::clone() const { return std::make_unique<ReferenceBackend>(*this); }

}  // namespace mdl
