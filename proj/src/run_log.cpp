// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

#include "mdl/run_log.hpp"

#include <fmt/format.h>

#include <json.hpp>

#include "mdl/errors.hpp"

namespace mdl {

RunLog::RunLog(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::app);
  if (!out_) throw ConfigError(fmt::format("cannot open run log {}", path.string()));
}

void RunLog::record(const ProgressRecord& record) {
  std::lock_guard lock(mutex_);
  records_.push_back(record);
  if (!out_.is_open()) return;
  nlohmann::ordered_json line;
  line["run"] = record.run;
  line["phase"] = record.phase;
  line["update"] = record.update;
  if (!record.dataset.empty()) line["dataset"] = record.dataset;
  if (record.loss) line["loss"] = *record.loss;
  if (record.validation_macro_f1) line["validation_macro_f1"] = *record.validation_macro_f1;
  if (!record.message.empty()) line["message"] = record.message;
  out_ << line.dump() << '\n';
  out_.flush();
}

void RunLog::warn(const std::string& run, const std::string& message) {
  {
    std::lock_guard lock(mutex_);
    warnings_.push_back(run.empty() ? message : run + ": " + message);
  }
  record(ProgressRecord{run, "warning", 0, "", std::nullopt, std::nullopt, message});
}

std::vector<ProgressRecord> RunLog::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::vector<std::string> RunLog::warnings() const {
  std::lock_guard lock(mutex_);
  return warnings_;
}

}  // namespace mdl
