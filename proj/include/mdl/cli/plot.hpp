// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mdl/eval.hpp"

namespace mdl::cli {

struct PlotLine {
  std::string method;
  std::string target;
  /// Baselines are dashed, the multi-dataset methods solid.
  bool dashed = false;
  /// (n, macro-F1 mean) sorted by n.
  std::vector<std::pair<std::size_t, double>> points;
};

/// One line per (method, target). Throws ConfigError("insufficient points")
/// unless some line has at least two n values.
std::vector<PlotLine> nshot_lines(std::span<const EvalReport> reports);

std::string render_nshot_svg(std::span<const PlotLine> lines);

void plot_nshot(std::span<const std::filesystem::path> reports, const std::filesystem::path& out);

}  // namespace mdl::cli
