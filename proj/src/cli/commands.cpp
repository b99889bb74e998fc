// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

#include "mdl/cli/commands.hpp"

#include <fmt/format.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <json.hpp>
#include <map>
#include <ostream>
#include <set>

#include "mdl/cli/plot.hpp"
#include "mdl/delimited.hpp"
#include "mdl/errors.hpp"
#include "mdl/random.hpp"
#include "mdl/run_log.hpp"

#ifndef MDL_BUILD_ID
#define MDL_BUILD_ID "unknown"
#endif

namespace mdl::cli {

std::string build_id() { return MDL_BUILD_ID; }

DirectoryModelCache::DirectoryModelCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw ConfigError(fmt::format("cannot create cache directory {}: {}", dir_.string(), ec.message()));
}

std::filesystem::path DirectoryModelCache::file_for(const std::string& key) const {
  return dir_ / fmt::format("{:016x}.snap", fnv1a(key));
}

std::optional<Snapshot> DirectoryModelCache::find(const std::string& key) {
  const auto path = file_for(key);
  auto key_path = path;
  key_path += ".key";
  if (!std::filesystem::exists(path) || !std::filesystem::exists(key_path)) return std::nullopt;
  if (read_file(key_path) != key) return std::nullopt;
  return read_snapshot(path);
}

void DirectoryModelCache::store(const std::string& key, const Snapshot& snapshot) {
  const auto path = file_for(key);
  auto key_path = path;
  key_path += ".key";
  write_snapshot(path, snapshot);
  write_file_atomic(key_path, key);
}

std::size_t DirectoryModelCache::size() const {
  std::size_t n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (entry.path().extension() == ".snap") ++n;
  }
  return n;
}

std::filesystem::path cache_dir_for(const ExperimentConfig& config) {
  if (const char* env = std::getenv(kCacheDirEnv); env != nullptr && *env != '\0') return env;
  return config.output_dir / "cache";
}

namespace {

void ensure_writable(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const auto probe = dir / ".write_probe";
  try {
    write_file_atomic(probe, "");
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("output directory {} is not writable", dir.string()));
  }
  std::filesystem::remove(probe, ec);
}

std::string safe_name(std::string_view id) {
  std::string out;
  for (char c : id) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out;
}

}  // namespace

TrainExternalSummary cmd_train_external(const ExperimentConfig& config) {
  const Corpus corpus = load_manifest(config.manifest);
  validate_against(config, corpus);
  ensure_writable(config.output_dir);
  const auto backend = make_backend(config, corpus);
  DirectoryModelCache cache(cache_dir_for(config));
  RunLog log(config.output_dir / "run_log.jsonl");
  Experiment experiment(corpus, *backend, {config.jobs, &log, &cache, std::nullopt});

  TrainExternalSummary summary;
  std::set<std::string> configs;
  for (const auto& spec : corpus.specs_with_role(DatasetRole::kTarget)) {
    RunDescriptor d;
    d.target = spec.id;
    d.seed_step1 = config.seed_step1;
    d.config = config.train;
    configs.insert(external_config_key(experiment.externals_for(d)));
    experiment.train_external_model(d);
    ++summary.targets;
  }
  summary.external_configs = configs.size();
  summary.trained = experiment.phases_trained();
  summary.cache_hits = experiment.cache_hits();
  return summary;
}

RunSummary cmd_run(const ExperimentConfig& config) {
  const Corpus corpus = load_manifest(config.manifest);
  validate_against(config, corpus);
  const auto descriptors = config.descriptors();
  if (descriptors.empty()) throw ConfigError("config: no runs");
  ensure_writable(config.output_dir);
  const auto backend = make_backend(config, corpus);
  DirectoryModelCache cache(cache_dir_for(config));
  RunLog log(config.output_dir / "run_log.jsonl");
  const auto shots_dir = config.output_dir / "shots";
  std::filesystem::create_directories(shots_dir);
  Experiment experiment(corpus, *backend, {config.jobs, &log, &cache, shots_dir});

  RunSummary summary;
  for (const auto& d : descriptors) summary.rows.push_back(experiment.run(d));
  summary.trained = experiment.phases_trained();
  summary.cache_hits = experiment.cache_hits();

  // All runs succeeded: write one report and provenance record per target.
  std::vector<std::string> targets;
  std::map<std::string, std::vector<std::size_t>> rows_by_target;
  for (std::size_t i = 0; i < summary.rows.size(); ++i) {
    const auto& t = summary.rows[i].target;
    if (!rows_by_target.count(t)) targets.push_back(t);
    rows_by_target[t].push_back(i);
  }
  const std::string config_hash = fmt::format("{:016x}", fnv1a(config.canonical_json()));
  for (const auto& target : targets) {
    std::vector<EvalReport> rows;
    nlohmann::ordered_json provenance;
    provenance["config_hash"] = config_hash;
    provenance["seeds"] = config.seeds;
    provenance["seed_step1"] = config.seed_step1;
    provenance["backend_id"] = backend->id();
    provenance["build_id"] = build_id();
    provenance["train"] = config.train.fingerprint();
    provenance["rows"] = nlohmann::ordered_json::array();
    for (std::size_t i : rows_by_target[target]) {
      const auto& r = summary.rows[i];
      rows.push_back(r);
      provenance["rows"].push_back({{"method", r.method},
                                    {"target", r.target},
                                    {"n", r.n_shots},
                                    {"seed_count", r.seed_count},
                                    {"seed_macro_f1", r.seed_macro_f1},
                                    {"unseen_labels", r.unseen_labels}});
    }
    const auto report_path = config.output_dir / fmt::format("report_{}.tsv", safe_name(target));
    write_report(report_path, rows);
    write_file_atomic(config.output_dir / fmt::format("report_{}.provenance.json", safe_name(target)),
                      provenance.dump(2) + "\n");
    summary.reports.push_back(report_path);
  }
  return summary;
}

void cmd_validate_manifest(const std::filesystem::path& manifest, std::ostream& out) {
  const Corpus corpus = load_manifest(manifest);
  for (const auto& d : corpus.datasets()) {
    out << fmt::format("{}\t{}\t{}\ttrain={}\tvalid={}\ttest={}\tlabels={}\n", d.spec.id, to_string(d.spec.role),
                       d.spec.source_group, d.samples.train.size(), d.samples.valid.size(), d.samples.test.size(),
                       fmt::join(d.spec.labels, ","));
  }
  const auto externals = corpus.specs_with_role(DatasetRole::kExternal);
  for (const auto& t : corpus.specs_with_role(DatasetRole::kTarget)) {
    const auto kept = leakage_filter(externals, t);
    const auto unseen = flag_unseen_labels(t, kept);
    out << fmt::format("target {}: {} of {} externals kept, unseen labels {}/{}{}{}\n", t.id, kept.size(),
                       externals.size(), unseen.size(), t.labels.size(), unseen.empty() ? "" : " ",
                       fmt::join(unseen, ","));
  }
  out << fmt::format("{} distinct external configurations\n",
                     distinct_external_configs(externals, corpus.specs_with_role(DatasetRole::kTarget)).size());
}

namespace {

void add_overrides(CLI::App* cmd, std::string& config_path, std::string& seeds, std::string& out,
                   std::string& backend, std::size_t& jobs) {
  cmd->add_option("--config", config_path, "Experiment configuration (JSON)")->required();
  cmd->add_option("--out", out, "Output directory (overrides the config)");
  cmd->add_option("--seeds", seeds, "Step-2 seeds, e.g. 1-5 or 1,3,7");
  cmd->add_option("--backend", backend, "Backend name");
  cmd->add_option("--jobs", jobs, "Parallel seed workers");
}

Overrides collect(const std::string& seeds, const std::string& out, const std::string& backend, std::size_t jobs) {
  Overrides o;
  if (!seeds.empty()) o.seeds = parse_seed_list(seeds);
  if (!out.empty()) o.out = out;
  if (!backend.empty()) o.backend = backend;
  if (jobs != 0) o.jobs = jobs;
  return o;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Few-shot multi-dataset prompt learning for abusive language"};
  app.require_subcommand(1);
  std::string config_path, seeds, out_dir, backend, manifest, plot_out;
  std::size_t jobs = 0;
  std::vector<std::string> report_files;

  auto* train = app.add_subcommand("train-external", "Train the external models for every target");
  add_overrides(train, config_path, seeds, out_dir, backend, jobs);
  auto* run = app.add_subcommand("run", "Run every configured experiment and write reports");
  add_overrides(run, config_path, seeds, out_dir, backend, jobs);
  auto* plot = app.add_subcommand("plot-nshot", "Plot macro-F1 against n from report files");
  plot->add_option("reports", report_files, "Report TSV files")->required();
  plot->add_option("--out", plot_out, "Output SVG file")->required();
  auto* validate = app.add_subcommand("validate-manifest", "Load a manifest and summarize it");
  validate->add_option("manifest", manifest, "Manifest JSON");
  validate->add_option("--config", config_path, "Experiment configuration; also checks its runs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (train->parsed() || run->parsed()) {
      ExperimentConfig config = load_experiment_config(config_path);
      apply_overrides(config, collect(seeds, out_dir, backend, jobs));
      if (train->parsed()) {
        const auto s = cmd_train_external(config);
        out << fmt::format("{} targets, {} external configurations: {} trained, {} cached\n", s.targets,
                           s.external_configs, s.trained, s.cache_hits);
      } else {
        const auto s = cmd_run(config);
        out << format_report(s.rows);
        for (const auto& p : s.reports) out << fmt::format("wrote {}\n", p.string());
      }
    } else if (plot->parsed()) {
      std::vector<std::filesystem::path> paths(report_files.begin(), report_files.end());
      plot_nshot(paths, plot_out);
      out << fmt::format("wrote {}\n", plot_out);
    } else if (validate->parsed()) {
      if (manifest.empty() == config_path.empty()) {
        throw ConfigError("validate-manifest: give a manifest path or --config, not both");
      }
      if (!config_path.empty()) {
        const ExperimentConfig config = load_experiment_config(config_path);
        const Corpus corpus = load_manifest(config.manifest);
        validate_against(config, corpus);
        cmd_validate_manifest(config.manifest, out);
        out << fmt::format("{} runs valid\n", config.descriptors().size());
      } else {
        cmd_validate_manifest(manifest, out);
      }
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace mdl::cli
