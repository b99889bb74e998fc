// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

#include "mdl/cli/config.hpp"

#include <fmt/format.h>

#include <charconv>
#include <json.hpp>
#include <set>

#include "mdl/delimited.hpp"
#include "mdl/errors.hpp"

namespace mdl::cli {
namespace {

using nlohmann::json;

void reject_unknown(const json& node, std::initializer_list<std::string_view> known, std::string_view where) {
  for (const auto& [key, value] : node.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || k == key;
    if (!ok) throw ConfigError(fmt::format("{}: unknown key '{}'", where, key));
  }
}

template <typename T>
T get(const json& node, std::string_view key, std::string_view where) {
  try {
    return node.at(std::string(key)).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}: bad value for '{}': {}", where, key, e.what()));
  }
}

TrainConfig parse_train(const json& node, TrainConfig config) {
  if (!node.is_object()) throw ConfigError("config: 'train' must be an object");
  reject_unknown(node,
                 {"learning_rate", "batch_size", "grad_accumulation", "warmup_steps", "dropout", "max_epochs_step1",
                  "early_stop_patience", "eval_every", "max_updates"},
                 "config.train");
  const auto w = "config.train";
  if (node.contains("learning_rate")) config.learning_rate = get<double>(node, "learning_rate", w);
  if (node.contains("batch_size")) config.batch_size = get<std::size_t>(node, "batch_size", w);
  if (node.contains("grad_accumulation")) config.grad_accumulation = get<std::size_t>(node, "grad_accumulation", w);
  if (node.contains("warmup_steps")) config.warmup_steps = get<std::size_t>(node, "warmup_steps", w);
  if (node.contains("dropout")) config.dropout = get<double>(node, "dropout", w);
  if (node.contains("max_epochs_step1")) config.max_epochs_step1 = get<std::size_t>(node, "max_epochs_step1", w);
  if (node.contains("early_stop_patience")) {
    config.early_stop_patience = get<std::size_t>(node, "early_stop_patience", w);
  }
  if (node.contains("eval_every")) config.eval_every = get<std::size_t>(node, "eval_every", w);
  if (node.contains("max_updates")) config.max_updates = get<std::size_t>(node, "max_updates", w);
  config.validate();
  return config;
}

RunSpec parse_run(const json& node, std::size_t index) {
  const std::string where = fmt::format("config.runs[{}]", index);
  if (!node.is_object()) throw ConfigError(where + ": must be an object");
  reject_unknown(node, {"method", "methods", "target", "related", "n_shots", "valid_size", "external_only_labels"},
                 where);
  RunSpec run;
  if (node.contains("method") == node.contains("methods")) {
    throw ConfigError(where + ": give exactly one of 'method' or 'methods'");
  }
  if (node.contains("method")) {
    run.methods.push_back(parse_method(get<std::string>(node, "method", where)));
  } else {
    for (const auto& m : get<std::vector<std::string>>(node, "methods", where)) run.methods.push_back(parse_method(m));
    if (run.methods.empty()) throw ConfigError(where + ": 'methods' is empty");
  }
  if (!node.contains("target")) throw ConfigError(where + ": missing 'target'");
  run.target = get<std::string>(node, "target", where);
  if (node.contains("related")) run.related = get<std::string>(node, "related", where);
  if (node.contains("n_shots")) {
    const auto& n = node["n_shots"];
    if (n.is_string() && n.get<std::string>() == "sweep") {
      run.n_shots.assign(kNShotSweep.begin(), kNShotSweep.end());
    } else if (n.is_array()) {
      run.n_shots = get<std::vector<std::size_t>>(node, "n_shots", where);
    } else {
      run.n_shots = {get<std::size_t>(node, "n_shots", where)};
    }
    if (run.n_shots.empty()) throw ConfigError(where + ": 'n_shots' is empty");
  }
  if (node.contains("valid_size")) run.valid_size = get<std::size_t>(node, "valid_size", where);
  if (node.contains("external_only_labels")) {
    run.external_only_labels =
        get<std::map<std::string, std::vector<std::string>>>(node, "external_only_labels", where);
  }
  return run;
}

}  // namespace

std::vector<RunDescriptor> ExperimentConfig::descriptors() const {
  std::vector<RunDescriptor> out;
  for (const auto& run : runs) {
    for (MethodKind method : run.methods) {
      for (std::size_t n : run.n_shots) {
        RunDescriptor d;
        d.method = method;
        d.target = run.target;
        d.related = run.related;
        d.n_shots = n;
        d.valid_size = run.valid_size;
        d.seeds_step2 = seeds;
        d.seed_step1 = seed_step1;
        d.config = train;
        d.external_only_labels = run.external_only_labels;
        out.push_back(std::move(d));
      }
    }
  }
  return out;
}

std::string ExperimentConfig::canonical_json() const {
  json j;
  j["manifest"] = manifest.filename().string();
  j["seeds"] = seeds;
  j["seed_step1"] = seed_step1;
  j["backend"] = backend;
  j["reference"] = {{"dim", reference.dim}, {"init_seed", reference.init_seed}};
  j["vocab_min_count"] = vocab_min_count;
  j["train"] = train.fingerprint();
  j["runs"] = json::array();
  for (const auto& d : descriptors()) {
    json r = {{"method", to_string(d.method)}, {"target", d.target}, {"n", d.n_shots}, {"valid_size", d.valid_size}};
    if (d.related) r["related"] = *d.related;
    if (d.external_only_labels) r["external_only_labels"] = *d.external_only_labels;
    j["runs"].push_back(r);
  }
  return j.dump();
}

ExperimentConfig parse_experiment_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("config: invalid JSON: {}", e.what()));
  }
  if (!root.is_object()) throw ConfigError("config: top level must be an object");
  reject_unknown(root,
                 {"manifest", "output_dir", "seeds", "seed_step1", "backend", "backend_options", "train", "jobs",
                  "runs"},
                 "config");
  ExperimentConfig config;
  if (!root.contains("manifest")) throw ConfigError("config: missing 'manifest'");
  config.manifest = base_dir / get<std::string>(root, "manifest", "config");
  config.output_dir = base_dir / root.value("output_dir", std::string("out"));
  if (root.contains("seeds")) {
    config.seeds = root["seeds"].is_string() ? parse_seed_list(root["seeds"].get<std::string>())
                                             : get<std::vector<std::uint64_t>>(root, "seeds", "config");
  }
  if (root.contains("seed_step1")) config.seed_step1 = get<std::uint64_t>(root, "seed_step1", "config");
  if (root.contains("backend")) config.backend = get<std::string>(root, "backend", "config");
  if (root.contains("backend_options")) {
    const auto& b = root["backend_options"];
    reject_unknown(b, {"dim", "init_seed", "vocab_min_count"}, "config.backend_options");
    if (b.contains("dim")) config.reference.dim = get<std::size_t>(b, "dim", "config.backend_options");
    if (b.contains("init_seed")) config.reference.init_seed = get<std::uint64_t>(b, "init_seed", "config.backend_options");
    if (b.contains("vocab_min_count")) {
      config.vocab_min_count = get<std::size_t>(b, "vocab_min_count", "config.backend_options");
    }
  }
  if (root.contains("train")) config.train = parse_train(root["train"], config.train);
  if (root.contains("jobs")) config.jobs = get<std::size_t>(root, "jobs", "config");
  if (root.contains("runs")) {
    if (!root["runs"].is_array()) throw ConfigError("config: 'runs' must be an array");
    for (std::size_t i = 0; i < root["runs"].size(); ++i) config.runs.push_back(parse_run(root["runs"][i], i));
  }
  if (config.seeds.empty()) throw ConfigError("config: 'seeds' is empty");
  return config;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError(fmt::format("config {} does not exist", path.string()));
  return parse_experiment_config(read_file(path), path.parent_path());
}

void apply_overrides(ExperimentConfig& config, const Overrides& overrides) {
  if (overrides.out) config.output_dir = *overrides.out;
  if (overrides.seeds) {
    if (overrides.seeds->empty()) throw ConfigError("--seeds: empty seed list");
    config.seeds = *overrides.seeds;
  }
  if (overrides.backend) config.backend = *overrides.backend;
  if (overrides.jobs) {
    if (*overrides.jobs == 0) throw ConfigError("--jobs must be positive");
    config.jobs = *overrides.jobs;
  }
}

std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
  auto number = [&](std::string_view part) {
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
    if (ec != std::errc() || ptr != part.data() + part.size() || part.empty()) {
      throw ConfigError(fmt::format("bad seed '{}' in '{}'", part, text));
    }
    return value;
  };
  std::vector<std::uint64_t> seeds;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    const std::string_view item = text.substr(start, comma - start);
    const std::size_t dash = item.find('-');
    if (dash == std::string_view::npos) {
      seeds.push_back(number(item));
    } else {
      const auto lo = number(item.substr(0, dash));
      const auto hi = number(item.substr(dash + 1));
      if (hi < lo) throw ConfigError(fmt::format("bad seed range '{}'", item));
      for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    }
    start = comma + 1;
  }
  std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
  if (unique.size() != seeds.size()) throw ConfigError(fmt::format("duplicate seeds in '{}'", text));
  return seeds;
}

std::unique_ptr<ModelBackend> make_backend(const ExperimentConfig& config, const Corpus& corpus) {
  if (config.backend != "reference") {
    throw ConfigError(fmt::format("backend '{}' is not available in this build (only 'reference')", config.backend));
  }
  ReferenceBackendOptions options = config.reference;
  options.dropout = config.train.dropout;
  return std::make_unique<ReferenceBackend>(vocabulary_from_corpus(corpus, config.vocab_min_count), options);
}

void validate_against(const ExperimentConfig& config, const Corpus& corpus) {
  if (config.backend != "reference") {
    throw ConfigError(fmt::format("backend '{}' is not available in this build (only 'reference')", config.backend));
  }
  for (const auto& d : config.descriptors()) d.validate(corpus);
}

}  // namespace mdl::cli
