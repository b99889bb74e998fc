// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "mdl/delimited.hpp"

namespace mdl::testing {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("mdl_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_rows(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, std::string>>& text_label) {
  Table t;
  t.header = {"text", "label"};
  for (const auto& [text, label] : text_label) t.rows.push_back({text, label});
  write_delimited(path, t);
}

/// `count` rows per label, texts "<label> sample <i> <extra>".
inline std::vector<std::pair<std::string, std::string>> rows_per_label(const std::vector<std::string>& labels,
                                                                       std::size_t count,
                                                                       const std::string& extra = "") {
  std::vector<std::pair<std::string, std::string>> rows;
  for (const auto& l : labels) {
    for (std::size_t i = 0; i < count; ++i) rows.emplace_back(l + " sample " + std::to_string(i) + extra, l);
  }
  return rows;
}

inline nlohmann::ordered_json dataset_node(const std::string& id, const std::string& source, const std::string& role,
                                           const std::vector<std::string>& labels, const std::string& train_file,
                                           const std::string& test_file) {
  nlohmann::ordered_json verbalizer = nlohmann::ordered_json::object();
  for (const auto& l : labels) verbalizer[l] = l;
  return {{"id", id},
          {"source_group", source},
          {"role", role},
          {"labels", labels},
          {"pvp", {{"pattern", "{text} It was {mask}"}, {"verbalizer", verbalizer}}},
          {"files", {{"train", train_file}, {"test", test_file}}}};
}

/// Copy of a manifest keeping only the listed dataset ids, written next to it.
inline std::filesystem::path subset_manifest(const std::filesystem::path& manifest, const std::vector<std::string>& ids,
                                             const std::string& name) {
  auto root = nlohmann::ordered_json::parse(read_file(manifest));
  nlohmann::ordered_json kept = nlohmann::ordered_json::array();
  for (const auto& d : root["datasets"]) {
    for (const auto& id : ids) {
      if (d["id"] == id) kept.push_back(d);
    }
  }
  root["datasets"] = kept;
  const auto out = manifest.parent_path() / name;
  write_file_atomic(out, root.dump(2));
  return out;
}

}  // namespace mdl::testing
