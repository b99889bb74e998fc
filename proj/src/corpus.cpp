// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

#include "mdl/corpus.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <json.hpp>
#include <numeric>

#include "mdl/delimited.hpp"
#include "mdl/errors.hpp"
#include "mdl/random.hpp"

namespace mdl {

using nlohmann::ordered_json;

std::string_view to_string(Genre genre) {
  switch (genre) {
    case Genre::kMicroblog: return "microblog";
    case Genre::kForum: return "forum";
    case Genre::kOther: return "other";
  }
  return "other";
}

std::string_view to_string(DatasetRole role) {
  switch (role) {
    case DatasetRole::kExternal: return "external";
    case DatasetRole::kTarget: return "target";
    case DatasetRole::kRelated: return "related";
  }
  return "external";
}

std::string_view to_string(SplitPolicy policy) {
  return policy == SplitPolicy::kExplicitFiles ? "explicit_files" : "ratio_80_20";
}

Genre parse_genre(std::string_view text) {
  if (text == "microblog") return Genre::kMicroblog;
  if (text == "forum") return Genre::kForum;
  if (text == "other") return Genre::kOther;
  throw ConfigError(fmt::format("unknown genre '{}'", text));
}

DatasetRole parse_role(std::string_view text) {
  if (text == "external") return DatasetRole::kExternal;
  if (text == "target") return DatasetRole::kTarget;
  if (text == "related") return DatasetRole::kRelated;
  throw ConfigError(fmt::format("unknown dataset role '{}'", text));
}

SplitPolicy parse_split_policy(std::string_view text) {
  if (text == "explicit_files") return SplitPolicy::kExplicitFiles;
  if (text == "ratio_80_20") return SplitPolicy::kRatio8020;
  throw ConfigError(fmt::format("unknown split policy '{}'", text));
}

bool DatasetSpec::has_label(std::string_view label) const {
  return std::find(labels.begin(), labels.end(), label) != labels.end();
}

LabelCanonMap LabelCanonMap::defaults() {
  LabelCanonMap map;
  for (const char* alias : {"neutral", "none", "no-hate", "no_hate", "nohate", "not-hate", "not_hate",
                            "non-hate", "non-hateful", "not-offensive", "not_offensive", "not-abusive",
                            "non-toxic", "not-toxic", "other_normal"}) {
    map.add(alias, "normal");
  }
  map.add("hateful", "hate");
  map.add("sexism", "misogyny");
  map.add("active", "individual");
  return map;
}

void LabelCanonMap::add(std::string alias, std::string canonical) {
  if (alias == canonical) return;
  if (entries_.contains(canonical)) {
    throw ConfigError(fmt::format("canon map: '{}' is an alias and cannot be the canonical name for '{}'",
                                  canonical, alias));
  }
  for (const auto& [a, c] : entries_) {
    if (c == alias) {
      throw ConfigError(fmt::format("canon map: '{}' is already canonical for '{}' and cannot become an alias",
                                    alias, a));
    }
  }
  entries_[std::move(alias)] = std::move(canonical);
}

std::string LabelCanonMap::canon(std::string_view label) const {
  const auto it = entries_.find(label);
  return it == entries_.end() ? std::string(label) : it->second;
}

LabelCanonMap LabelCanonMap::merged(const LabelCanonMap& overrides) const {
  auto combined = entries_;
  for (const auto& [alias, canonical] : overrides.entries_) {
    // The override makes `canonical` a canonical name and re-points chains
    // that ended in `alias`.
    combined.erase(canonical);
    for (auto& [a, c] : combined) {
      if (c == alias) c = canonical;
    }
    combined[alias] = canonical;
  }
  LabelCanonMap out;
  for (const auto& [a, c] : combined) {
    if (combined.contains(c)) throw ConfigError(fmt::format("canon map: '{}' -> '{}' is not idempotent", a, c));
  }
  out.entries_ = std::move(combined);
  return out;
}

Corpus::Corpus(std::vector<LoadedDataset> datasets, LabelCanonMap canon)
    : datasets_(std::move(datasets)), canon_(std::move(canon)) {}

bool Corpus::contains(std::string_view id) const {
  return std::any_of(datasets_.begin(), datasets_.end(), [&](const auto& d) { return d.spec.id == id; });
}

const LoadedDataset& Corpus::dataset(std::string_view id) const {
  for (const auto& d : datasets_) {
    if (d.spec.id == id) return d;
  }
  throw ConfigError(fmt::format("unknown dataset id '{}'", id));
}

std::vector<DatasetSpec> Corpus::specs_with_role(DatasetRole role) const {
  std::vector<DatasetSpec> out;
  for (const auto& d : datasets_) {
    if (d.spec.role == role) out.push_back(d.spec);
  }
  return out;
}

std::pair<std::vector<Sample>, std::vector<Sample>> split_80_20(std::vector<Sample> samples, std::uint64_t seed) {
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  const std::size_t first_count = samples.size() * 4 / 5;
  std::vector<std::size_t> first_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(first_count));
  std::vector<std::size_t> second_idx(order.begin() + static_cast<std::ptrdiff_t>(first_count), order.end());
  std::sort(first_idx.begin(), first_idx.end());
  std::sort(second_idx.begin(), second_idx.end());
  std::pair<std::vector<Sample>, std::vector<Sample>> out;
  out.first.reserve(first_idx.size());
  out.second.reserve(second_idx.size());
  for (std::size_t i : first_idx) out.first.push_back(std::move(samples[i]));
  for (std::size_t i : second_idx) out.second.push_back(std::move(samples[i]));
  return out;
}

SampleSet make_splits(SampleSet given, SplitPolicy policy, std::uint64_t seed) {
  constexpr std::size_t kMinRatioSamples = 5;
  if (policy == SplitPolicy::kExplicitFiles) {
    if (given.train.empty() || given.test.empty()) {
      throw ConfigError("explicit_files split policy needs non-empty train and test files");
    }
  } else if (given.test.empty()) {
    if (given.train.size() < kMinRatioSamples) {
      throw ConfigError(fmt::format("ratio split needs at least {} samples, got {}", kMinRatioSamples,
                                    given.train.size()));
    }
    auto [train, test] = split_80_20(std::move(given.train), derive_seed(seed, "test-split"));
    given.train = std::move(train);
    given.test = std::move(test);
    given.provenance = SplitProvenance::kDerived8020;
  }
  if (given.valid.empty()) {
    if (given.train.size() < 2) {
      throw ConfigError(fmt::format("cannot carve a validation split from {} training samples", given.train.size()));
    }
    auto [train, valid] = split_80_20(std::move(given.train), derive_seed(seed, "valid-split"));
    given.train = std::move(train);
    given.valid = std::move(valid);
    given.provenance = SplitProvenance::kDerived8020;
  }
  return given;
}

std::vector<DatasetSpec> leakage_filter(std::span<const DatasetSpec> externals, const DatasetSpec& target) {
  std::vector<DatasetSpec> kept;
  for (const auto& e : externals) {
    if (e.source_group != target.source_group) kept.push_back(e);
  }
  return kept;
}

std::string external_config_key(std::span<const DatasetSpec> externals) {
  std::vector<std::string> ids;
  for (const auto& e : externals) ids.push_back(e.id);
  std::sort(ids.begin(), ids.end());
  std::string key = "externals[";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) key += ',';
    key += ids[i];
  }
  key += ']';
  return key;
}

std::set<std::string> distinct_external_configs(std::span<const DatasetSpec> externals,
                                                std::span<const DatasetSpec> targets) {
  std::set<std::string> keys;
  for (const auto& t : targets) keys.insert(external_config_key(leakage_filter(externals, t)));
  return keys;
}

namespace {

std::string trimmed(std::string_view s) {
  const auto is_space = [](unsigned char c) { return c == ' ' || (c >= '\t' && c <= '\r'); };
  while (!s.empty() && is_space(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && is_space(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

LabelCanonMap canon_from_json(const ordered_json& node, std::string_view where) {
  LabelCanonMap map;
  if (node.is_null()) return map;
  if (!node.is_object()) throw ConfigError(fmt::format("{}: 'canon' must be an object", where));
  for (const auto& [alias, canonical] : node.items()) {
    if (!canonical.is_string()) throw ConfigError(fmt::format("{}: canon entry '{}' must be a string", where, alias));
    map.add(alias, canonical.get<std::string>());
  }
  return map;
}

std::string required_string(const ordered_json& node, const char* key, std::string_view where) {
  if (!node.contains(key) || !node[key].is_string()) {
    throw ConfigError(fmt::format("{}: missing string field '{}'", where, key));
  }
  return node[key].get<std::string>();
}

Pvp pvp_from_json(const ordered_json& node, std::string id, std::string_view where) {
  if (!node.is_object()) throw ConfigError(fmt::format("{}: PVP must be an object", where));
  Pvp pvp;
  pvp.id = std::move(id);
  pvp.pattern = Pattern(node.value("pattern", std::string(Pattern::classification().str())));
  if (!node.contains("verbalizer") || !node["verbalizer"].is_object()) {
    throw ConfigError(fmt::format("{}: PVP '{}' needs a 'verbalizer' object", where, pvp.id));
  }
  std::vector<std::pair<std::string, std::string>> entries;
  for (const auto& [label, word] : node["verbalizer"].items()) {
    if (!word.is_string()) throw ConfigError(fmt::format("{}: verbalizer word for '{}' must be a string", where, label));
    entries.emplace_back(label, word.get<std::string>());
  }
  pvp.verbalizer = Verbalizer(std::move(entries));
  return pvp;
}

std::vector<Sample> read_samples(const std::filesystem::path& file, const DatasetSpec& spec,
                                 const LabelCanonMap& canon, std::size_t& next_uid) {
  if (!std::filesystem::exists(file)) {
    throw ConfigError(fmt::format("dataset '{}': missing data file {}", spec.id, file.string()));
  }
  const Table table = read_delimited(file);
  const int text_col = table.column("text");
  const int label_col = table.column("label");
  if (text_col < 0 || label_col < 0) {
    throw ConfigError(fmt::format("dataset '{}': {} needs header columns text,label", spec.id, file.string()));
  }
  std::vector<Sample> samples;
  samples.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    Sample s;
    s.text = row[static_cast<std::size_t>(text_col)];
    if (trimmed(s.text).empty()) {
      throw ConfigError(fmt::format("dataset '{}': {} row {} has an empty text", spec.id, file.string(), r + 2));
    }
    s.label = canon.canon(trimmed(row[static_cast<std::size_t>(label_col)]));
    if (!spec.has_label(s.label)) {
      throw ConfigError(fmt::format("dataset '{}': {} row {} has label '{}' outside the dataset labels", spec.id,
                                    file.string(), r + 2, row[static_cast<std::size_t>(label_col)]));
    }
    s.dataset_id = spec.id;
    s.uid = next_uid++;
    samples.push_back(std::move(s));
  }
  return samples;
}

std::uint64_t hash_samples(const SampleSet& set) {
  std::uint64_t h = fnv1a("samples");
  for (const auto* split : {&set.train, &set.valid, &set.test}) {
    h = fnv1a("|split|", h);
    for (const auto& s : *split) {
      h = fnv1a(s.text, h);
      h = fnv1a("\t", h);
      h = fnv1a(s.label, h);
      h = fnv1a("\n", h);
    }
  }
  return h;
}

}  // namespace

Corpus parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir) {
  ordered_json root;
  try {
    root = ordered_json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("manifest does not parse: {}", e.what()));
  }
  if (!root.is_object()) throw ConfigError("manifest must be a JSON object");

  LabelCanonMap global = root.value("use_default_canon", true) ? LabelCanonMap::defaults() : LabelCanonMap{};
  global = global.merged(canon_from_json(root.contains("canon") ? root["canon"] : ordered_json(), "manifest"));
  const std::uint64_t split_seed = root.value("split_seed", std::uint64_t{0});

  std::map<std::string, ordered_json> shared_pvps;
  if (root.contains("pvps")) {
    if (!root["pvps"].is_object()) throw ConfigError("manifest: 'pvps' must be an object keyed by PVP id");
    for (const auto& [id, node] : root["pvps"].items()) shared_pvps[id] = node;
  }

  std::vector<LoadedDataset> loaded;
  std::set<std::string> seen_ids;
  const ordered_json datasets = root.value("datasets", ordered_json::array());
  if (!datasets.is_array()) throw ConfigError("manifest: 'datasets' must be an array");

  for (std::size_t i = 0; i < datasets.size(); ++i) {
    const auto& node = datasets[i];
    const std::string where = fmt::format("manifest entry {}", i);
    if (!node.is_object()) throw ConfigError(fmt::format("{}: must be an object", where));

    LoadedDataset d;
    DatasetSpec& spec = d.spec;
    spec.id = required_string(node, "id", where);
    const std::string here = fmt::format("dataset '{}'", spec.id);
    if (!seen_ids.insert(spec.id).second) throw ConfigError(fmt::format("duplicate dataset id '{}'", spec.id));
    spec.source_group = required_string(node, "source_group", here);
    spec.language = node.value("language", std::string("en"));
    spec.genre = parse_genre(node.value("genre", std::string("microblog")));
    spec.role = parse_role(required_string(node, "role", here));
    spec.split_policy = parse_split_policy(node.value("split_policy", std::string("explicit_files")));

    const LabelCanonMap canon =
        global.merged(canon_from_json(node.contains("canon") ? node["canon"] : ordered_json(), here));

    if (!node.contains("labels") || !node["labels"].is_array() || node["labels"].empty()) {
      throw ConfigError(fmt::format("{}: needs a non-empty 'labels' array", here));
    }
    for (const auto& l : node["labels"]) {
      std::string label = canon.canon(l.get<std::string>());
      if (spec.has_label(label)) throw ConfigError(fmt::format("{}: label '{}' listed twice", here, label));
      spec.labels.push_back(std::move(label));
    }
    for (const auto& l : node.value("external_only_labels", ordered_json::array())) {
      std::string label = canon.canon(l.get<std::string>());
      if (!spec.has_label(label)) {
        throw ConfigError(fmt::format("{}: external-only label '{}' is not a dataset label", here, label));
      }
      spec.external_only_labels.push_back(std::move(label));
    }

    // PVP: either a reference into "pvps" or an inline object.
    if (!node.contains("pvp")) throw ConfigError(fmt::format("{}: missing 'pvp'", here));
    Pvp raw;
    if (node["pvp"].is_string()) {
      spec.pvp_id = node["pvp"].get<std::string>();
      const auto it = shared_pvps.find(spec.pvp_id);
      if (it == shared_pvps.end()) throw ConfigError(fmt::format("{}: unknown PVP '{}'", here, spec.pvp_id));
      raw = pvp_from_json(it->second, spec.pvp_id, here);
    } else {
      spec.pvp_id = spec.id;
      raw = pvp_from_json(node["pvp"], spec.pvp_id, here);
    }
    std::vector<std::pair<std::string, std::string>> ordered;
    for (const auto& label : spec.labels) {
      bool found = false;
      for (const auto& [l, w] : raw.verbalizer.entries()) {
        if (canon.canon(l) == label) {
          ordered.emplace_back(label, w);
          found = true;
          break;
        }
      }
      if (!found) throw ConfigError(fmt::format("{}: PVP '{}' has no word for label '{}'", here, spec.pvp_id, label));
    }
    if (raw.verbalizer.size() != spec.labels.size()) {
      throw ConfigError(fmt::format("{}: PVP '{}' covers {} labels, dataset has {}", here, spec.pvp_id,
                                    raw.verbalizer.size(), spec.labels.size()));
    }
    d.pvp = Pvp{spec.pvp_id, raw.pattern, Verbalizer(std::move(ordered))};

    if (!node.contains("files") || !node["files"].is_object()) {
      throw ConfigError(fmt::format("{}: needs a 'files' object", here));
    }
    const auto& files = node["files"];
    for (const auto& [key, value] : files.items()) {
      if (key != "train" && key != "valid" && key != "test" && key != "all") {
        throw ConfigError(fmt::format("{}: unknown file role '{}'", here, key));
      }
      if (!value.is_string()) throw ConfigError(fmt::format("{}: file '{}' must be a path string", here, key));
    }
    std::size_t next_uid = 0;
    auto load = [&](const char* key) -> std::vector<Sample> {
      if (!files.contains(key)) return {};
      return read_samples(base_dir / files[key].get<std::string>(), spec, canon, next_uid);
    };
    SampleSet given;
    if (files.contains("all")) {
      if (spec.split_policy != SplitPolicy::kRatio8020 || files.size() != 1) {
        throw ConfigError(fmt::format("{}: an 'all' file requires ratio_80_20 and no other files", here));
      }
      given.train = load("all");
    } else {
      given.train = load("train");
      given.valid = load("valid");
      given.test = load("test");
    }
    d.samples = make_splits(std::move(given), spec.split_policy, derive_seed(split_seed, spec.id));
    d.content_hash = hash_samples(d.samples);
    loaded.push_back(std::move(d));
  }
  return Corpus(std::move(loaded), std::move(global));
}

Corpus load_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError(fmt::format("manifest {} does not exist", path.string()));
  return parse_manifest(read_file(path), path.parent_path());
}

}  // namespace mdl
