// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

#include "mdl/synthetic.hpp"

#include <fmt/format.h>

#include <json.hpp>
#include <map>
#include <string>
#include <vector>

#include "mdl/delimited.hpp"
#include "mdl/random.hpp"

namespace mdl {
namespace {

using nlohmann::ordered_json;

std::vector<std::string> pseudo_words(std::string_view stem, std::size_t count) {
  static constexpr const char* kSyllables[] = {"ka", "lo", "mi", "ru", "te", "vo", "shi", "dra", "po", "ne", "zu", "fa"};
  std::vector<std::string> words;
  for (std::size_t i = 0; i < count; ++i) {
    words.push_back(fmt::format("{}{}{}", stem, kSyllables[i % 12], kSyllables[(i / 12 + i * 5) % 12]));
  }
  return words;
}

struct Vocabulary {
  std::vector<std::string> filler = pseudo_words("f", 60);
  std::map<std::string, std::vector<std::string>> keywords;

  Vocabulary() {
    for (const char* label : {"hate", "offensive", "misogyny", "fearful"}) {
      keywords[label] = pseudo_words(std::string(label).substr(0, 3), 12);
    }
    // Mostly the fearful keywords, plus a few of its own.
    auto insult = keywords["fearful"];
    insult.resize(8);
    for (auto& w : pseudo_words("ins", 4)) insult.push_back(w);
    keywords["insult"] = insult;
  }
};

std::string make_text(const Vocabulary& vocab, const std::string& label, Rng& rng) {
  std::vector<std::string> words;
  const std::size_t n_filler = 5 + rng.uniform_index(5);
  for (std::size_t i = 0; i < n_filler; ++i) words.push_back(vocab.filler[rng.uniform_index(vocab.filler.size())]);
  if (label != "normal") {
    const auto& pool = vocab.keywords.at(label);
    const std::size_t n_key = 1 + rng.uniform_index(2);
    for (std::size_t i = 0; i < n_key; ++i) {
      const std::size_t at = rng.uniform_index(words.size() + 1);
      words.insert(words.begin() + static_cast<std::ptrdiff_t>(at), pool[rng.uniform_index(pool.size())]);
    }
  }
  std::string text;
  for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
  return text;
}

void write_split(const std::filesystem::path& path, const Vocabulary& vocab,
                 const std::vector<std::pair<std::string, std::size_t>>& counts, Rng& rng) {
  Table table;
  table.header = {"text", "label"};
  for (const auto& [label, n] : counts) {
    for (std::size_t i = 0; i < n; ++i) table.rows.push_back({make_text(vocab, label, rng), label});
  }
  rng.shuffle(std::span<std::vector<std::string>>(table.rows));
  write_delimited(path, table);
}

std::vector<std::pair<std::string, std::size_t>> balanced(const std::vector<std::string>& labels, std::size_t total) {
  std::vector<std::pair<std::string, std::size_t>> counts;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    counts.emplace_back(labels[i], total / labels.size() + (i < total % labels.size() ? 1 : 0));
  }
  return counts;
}

ordered_json verbalizer_for(const std::vector<std::string>& labels, const std::map<std::string, std::string>& words) {
  ordered_json v = ordered_json::object();
  for (const auto& l : labels) v[l] = words.count(l) ? words.at(l) : l;
  return v;
}

}  // namespace

std::filesystem::path write_behavior_fixture(const std::filesystem::path& dir, const BehaviorFixtureOptions& options) {
  std::filesystem::create_directories(dir / "data");
  const Vocabulary vocab;
  const std::map<std::string, std::string> words = {{"normal", "normal"},      {"hate", "hate"},
                                                    {"offensive", "offensive"}, {"insult", "insult"},
                                                    {"misogyny", "sexist"},     {"fearful", "fearful"}};
  ordered_json manifest;
  manifest["version"] = 1;
  manifest["split_seed"] = options.seed;
  manifest["datasets"] = ordered_json::array();

  struct External {
    std::string id;
    std::vector<std::string> labels;
    std::vector<std::string> external_only;
  };
  const std::vector<External> externals = {{"ext_hate", {"hate", "normal"}, {}},
                                           {"ext_offense", {"offensive", "normal"}, {}},
                                           {"ext_misc", {"misogyny", "fearful", "normal"}, {"fearful"}}};
  for (const auto& e : externals) {
    Rng rng(derive_seed(options.seed, e.id));
    for (const auto& [split, n] : std::vector<std::pair<std::string, std::size_t>>{
             {"train", options.external_train}, {"valid", options.external_valid}, {"test", options.external_test}}) {
      write_split(dir / "data" / fmt::format("{}_{}.tsv", e.id, split), vocab, balanced(e.labels, n), rng);
    }
    ordered_json node;
    node["id"] = e.id;
    node["source_group"] = e.id;
    node["language"] = "en";
    node["role"] = "external";
    node["labels"] = e.labels;
    node["pvp"] = {{"pattern", "{text} It was {mask}"}, {"verbalizer", verbalizer_for(e.labels, words)}};
    node["files"] = {{"train", "data/" + e.id + "_train.tsv"},
                     {"valid", "data/" + e.id + "_valid.tsv"},
                     {"test", "data/" + e.id + "_test.tsv"}};
    if (!e.external_only.empty()) node["external_only_labels"] = e.external_only;
    manifest["datasets"].push_back(node);
  }

  const std::vector<std::string> target_labels = {"normal", "hate", "offensive", "insult"};
  auto add_target = [&](const std::string& id, const std::string& role) {
    Rng rng(derive_seed(options.seed, id));
    std::vector<std::pair<std::string, std::size_t>> train;
    for (std::size_t i = 0; i < 4; ++i) train.emplace_back(target_labels[i], options.target_train[i]);
    write_split(dir / "data" / (id + "_train.tsv"), vocab, train, rng);
    write_split(dir / "data" / (id + "_test.tsv"), vocab,
                balanced(target_labels, options.target_test_per_label * target_labels.size()), rng);
    ordered_json node;
    node["id"] = id;
    node["source_group"] = id;
    node["language"] = "en";
    node["role"] = role;
    node["labels"] = target_labels;
    node["pvp"] = {{"pattern", "{text} It was {mask}"}, {"verbalizer", verbalizer_for(target_labels, words)}};
    node["files"] = {{"train", "data/" + id + "_train.tsv"}, {"test", "data/" + id + "_test.tsv"}};
    manifest["datasets"].push_back(node);
  };
  add_target("target", "target");
  if (options.with_related) add_target("rel", "related");

  const auto path = dir / "manifest.json";
  write_file_atomic(path, manifest.dump(2) + "\n");
  return path;
}

std::filesystem::path write_setup_manifest(const std::filesystem::path& dir, std::size_t samples_per_label) {
  std::filesystem::create_directories(dir / "data");
  struct Entry {
    std::string id;
    std::string source;
    std::string language;
    std::string genre;
    std::string role;
    std::vector<std::string> labels;
    std::string pvp;
    std::vector<std::string> external_only;
  };
  // Labels are listed as the datasets name them; the default alias map
  // unifies hateful/hate, sexism/misogyny and active/individual.
  const std::vector<Entry> entries = {
      {"ami_bin_en", "AMI", "en", "microblog", "external", {"misogyny", "normal"}, "cls", {}},
      {"ami_fine_en", "AMI", "en", "microblog", "external",
       {"stereotype", "dominance", "derailing", "sexual_harassment", "discredit"}, "cls", {"derailing"}},
      {"ami_target_en", "AMI", "en", "microblog", "external", {"active", "passive"}, "tgt", {}},
      {"hasoc_fine_ext_en", "HASOC", "en", "microblog", "external", {"hate", "offensive", "profanity"}, "cls", {}},
      {"hasoc_target_en", "HASOC", "en", "microblog", "external", {"targeted", "untargeted"}, "tgt", {"untargeted"}},
      {"hateval_target_en", "HatEval", "en", "microblog", "external", {"individual", "group"}, "tgt", {}},
      {"lsa_fine_en", "LSA", "en", "microblog", "external", {"abusive", "hateful", "spam", "normal"}, "cls", {"spam"}},
      {"mlma_fine_en", "MLMA", "en", "microblog", "external",
       {"abusive", "hateful", "offensive", "disrespectful", "fearful", "normal"}, "cls", {"disrespectful", "fearful"}},
      {"srw_fine_en", "SRW", "en", "microblog", "external", {"sexism", "racism", "normal"}, "cls", {}},
      {"hasoc_fine_en", "HASOC", "en", "microblog", "target", {"hate", "offensive", "profanity"}, "cls", {}},
      {"hasoc_fine_hi", "HASOC", "hi", "microblog", "target", {"hate", "offensive", "profanity"}, "cls", {}},
      {"hasoc_fine_de", "HASOC", "de", "microblog", "target", {"hate", "offensive", "profanity"}, "cls", {}},
      {"germeval_fine_de", "GermEval", "de", "microblog", "target", {"profanity", "insult", "abusive", "normal"}, "cls",
       {}},
      {"toldbr_fine_pt", "ToLD-Br", "pt-br", "microblog", "target",
       {"lgbtqphobia", "obscene", "insult", "racism", "misogyny", "xenophobia", "normal"}, "cls", {}},
      {"olid_target_en", "OLID", "en", "microblog", "target", {"individual", "group", "other"}, "tgt", {}},
      {"stormfront_bin_en", "Stormfront", "en", "forum", "target", {"hate", "normal"}, "cls", {}},
      {"hateval_bin_en", "HatEval", "en", "microblog", "target", {"hateful", "normal"}, "cls", {}},
      {"hateval_bin_es", "HatEval", "es", "microblog", "target", {"hateful", "normal"}, "cls", {}},
      {"olid_bin_en", "OLID", "en", "microblog", "target", {"offensive", "normal"}, "cls", {}},
      {"germeval_bin_de", "GermEval", "de", "microblog", "target", {"offensive", "normal"}, "cls", {}},
      {"ami_bin_target_en", "AMI", "en", "microblog", "target", {"misogyny", "normal"}, "cls", {}},
      {"ami_bin_it", "AMI", "it", "microblog", "target", {"misogyny", "normal"}, "cls", {}},
  };
  const std::map<std::string, std::string> words = {
      {"sexual_harassment", "harassment"}, {"lgbtqphobia", "homophobic"}, {"hateful", "hate"},
      {"sexism", "sexist"},                {"misogyny", "sexist"},         {"active", "individual"}};
  const std::map<std::string, std::string> canonical = {
      {"hateful", "hate"}, {"sexism", "misogyny"}, {"active", "individual"}};

  ordered_json manifest;
  manifest["version"] = 1;
  manifest["split_seed"] = 0;
  manifest["pvps"] = ordered_json::object();
  manifest["datasets"] = ordered_json::array();
  Rng rng(11);
  const std::vector<std::string> filler = pseudo_words("w", 24);
  for (const auto& e : entries) {
    // Verbalizers are keyed by canonical label, so one word serves aliases.
    ordered_json verbalizer = ordered_json::object();
    for (const auto& l : e.labels) {
      const std::string canon = canonical.count(l) ? canonical.at(l) : l;
      verbalizer[l] = words.count(canon) ? words.at(canon) : canon;
    }
    Table train;
    Table test;
    train.header = test.header = {"text", "label"};
    for (const auto& l : e.labels) {
      for (std::size_t i = 0; i < samples_per_label + 2; ++i) {
        std::string text = fmt::format("{} {} {}", filler[rng.uniform_index(filler.size())], l,
                                       filler[rng.uniform_index(filler.size())]);
        (i < samples_per_label ? train : test).rows.push_back({text, l});
      }
    }
    write_delimited(dir / "data" / (e.id + "_train.csv"), train);
    write_delimited(dir / "data" / (e.id + "_test.csv"), test);

    ordered_json node;
    node["id"] = e.id;
    node["source_group"] = e.source;
    node["language"] = e.language;
    node["genre"] = e.genre;
    node["role"] = e.role;
    node["labels"] = e.labels;
    node["pvp"] = {{"pattern", e.pvp == "tgt" ? "{text} It was targeted at {mask}" : "{text} It was {mask}"},
                   {"verbalizer", verbalizer}};
    node["files"] = {{"train", "data/" + e.id + "_train.csv"}, {"test", "data/" + e.id + "_test.csv"}};
    if (!e.external_only.empty()) node["external_only_labels"] = e.external_only;
    manifest["datasets"].push_back(node);
  }
  const auto path = dir / "manifest.json";
  write_file_atomic(path, manifest.dump(2) + "\n");
  return path;
}

}  // namespace mdl
