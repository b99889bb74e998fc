// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

// Command implementations behind the mdl executable. Exit codes: 0 success,
// 1 configuration error, 2 runtime or training failure.

#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mdl/cli/config.hpp"
#include "mdl/trainer.hpp"

namespace mdl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;

/// Environment variable naming the model cache directory.
inline constexpr const char* kCacheDirEnv = "MDL_CACHE_DIR";

std::string build_id();

/// Snapshots stored as files named by a hash of the cache key, each with the
/// full key alongside so collisions are detected.
class DirectoryModelCache final : public ModelCache {
 public:
  explicit DirectoryModelCache(std::filesystem::path dir);
  std::optional<Snapshot> find(const std::string& key) override;
  void store(const std::string& key, const Snapshot& snapshot) override;
  std::size_t size() const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path file_for(const std::string& key) const;
  std::filesystem::path dir_;
};

/// $MDL_CACHE_DIR, or <output_dir>/cache.
std::filesystem::path cache_dir_for(const ExperimentConfig& config);

struct TrainExternalSummary {
  std::size_t targets = 0;
  std::size_t external_configs = 0;
  std::size_t trained = 0;
  std::size_t cache_hits = 0;
};

/// Trains (or finds cached) the external model for every target in the manifest.
TrainExternalSummary cmd_train_external(const ExperimentConfig& config);

struct RunSummary {
  std::vector<std::filesystem::path> reports;
  std::vector<EvalReport> rows;
  std::size_t trained = 0;
  std::size_t cache_hits = 0;
};

/// Validates every run first; reports are written only when all runs succeed.
/// One report_<target>.tsv plus report_<target>.provenance.json per target.
RunSummary cmd_run(const ExperimentConfig& config);

/// Loads the manifest and prints a per-dataset summary.
void cmd_validate_manifest(const std::filesystem::path& manifest, std::ostream& out);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mdl::cli
