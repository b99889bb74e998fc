// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace mdl {

struct ProgressRecord {
  std::string run;    // method/target/n/seed
  std::string phase;  // step1, step2, mlm, related, joint
  std::size_t update = 0;
  std::string dataset;
  std::optional<double> loss;
  std::optional<double> validation_macro_f1;
  std::string message;
};

/// Append-only JSON-lines progress log, safe to share between threads.
/// A default-constructed log keeps records in memory only.
class RunLog {
 public:
  RunLog() = default;
  explicit RunLog(const std::filesystem::path& path);

  void record(const ProgressRecord& record);
  void warn(const std::string& run, const std::string& message);

  std::vector<ProgressRecord> records() const;
  std::vector<std::string> warnings() const;

 private:
  mutable std::mutex mutex_;
  std::ofstream out_;
  std::vector<ProgressRecord> records_;
  std::vector<std::string> warnings_;
};

}  // namespace mdl
