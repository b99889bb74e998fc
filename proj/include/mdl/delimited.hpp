// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mdl {

/// A delimited text table: one header row plus data rows of equal width.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column, or -1 when absent.
  int column(std::string_view name) const;
};

/// Delimiter is chosen from the extension: ".tsv" is tab separated, anything
/// else is RFC 4180 CSV (quoted fields, doubled quotes, embedded newlines).
char delimiter_for(const std::filesystem::path& path);

Table parse_delimited(std::string_view content, char delimiter);
Table read_delimited(const std::filesystem::path& path);

std::string format_delimited(const Table& table, char delimiter);
void write_delimited(const std::filesystem::path& path, const Table& table);

/// Writes the file through a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

}  // namespace mdl
