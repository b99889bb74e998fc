// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

#include "mdl/cli/plot.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "mdl/delimited.hpp"
#include "mdl/errors.hpp"

namespace mdl::cli {

std::vector<PlotLine> nshot_lines(std::span<const EvalReport> reports) {
  std::map<std::pair<std::string, std::string>, PlotLine> groups;
  for (const auto& r : reports) {
    auto& line = groups[{r.target, r.method}];
    line.method = r.method;
    line.target = r.target;
    line.dashed = r.method == "LM_BASE" || r.method == "MLM" || r.method == "MTL";
    for (const auto& [n, value] : line.points) {
      if (n == r.n_shots) throw ConfigError(fmt::format("duplicate n={} for {} on {}", n, r.method, r.target));
    }
    line.points.emplace_back(r.n_shots, r.macro_mean);
  }
  std::vector<PlotLine> lines;
  bool enough = false;
  for (auto& [key, line] : groups) {
    std::sort(line.points.begin(), line.points.end());
    enough = enough || line.points.size() >= 2;
    lines.push_back(std::move(line));
  }
  if (!enough) throw ConfigError("insufficient points: no (method, target) has two or more n values");
  return lines;
}

std::string render_nshot_svg(std::span<const PlotLine> lines) {
  constexpr double kWidth = 640, kHeight = 400, kLeft = 60, kRight = 180, kTop = 20, kBottom = 50;
  static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
                                            "#e377c2", "#17becf"};
  std::size_t n_min = SIZE_MAX, n_max = 0;
  for (const auto& l : lines) {
    for (const auto& [n, v] : l.points) {
      n_min = std::min(n_min, n);
      n_max = std::max(n_max, n);
    }
  }
  const double lo = std::log2(static_cast<double>(std::max<std::size_t>(n_min, 1)));
  const double hi = std::max(lo + 1.0, std::log2(static_cast<double>(std::max<std::size_t>(n_max, 1))));
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto x_of = [&](std::size_t n) {
    return kLeft + (std::log2(static_cast<double>(std::max<std::size_t>(n, 1))) - lo) / (hi - lo) * plot_w;
  };
  auto y_of = [&](double f1) { return kTop + (1.0 - std::clamp(f1, 0.0, 1.0)) * plot_h; };

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      kWidth, kHeight);
  svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", kLeft, kTop + plot_h,
                     kLeft + plot_w);
  svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", kLeft, kTop,
                     kTop + plot_h);
  for (int tick = 0; tick <= 5; ++tick) {
    const double v = tick / 5.0;
    svg += fmt::format("<text x=\"{}\" y=\"{:.1f}\" font-size=\"11\" text-anchor=\"end\">{:.0f}</text>\n", kLeft - 6,
                       y_of(v) + 4, v * 100);
  }
  std::vector<std::size_t> ticks;
  for (const auto& l : lines) {
    for (const auto& [n, v] : l.points) ticks.push_back(n);
  }
  std::sort(ticks.begin(), ticks.end());
  ticks.erase(std::unique(ticks.begin(), ticks.end()), ticks.end());
  for (std::size_t n : ticks) {
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n", x_of(n),
                       kTop + plot_h + 16, n);
  }
  svg += fmt::format("<text x=\"{:.1f}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">n</text>\n",
                     kLeft + plot_w / 2, kHeight - 10);
  svg += fmt::format(
      "<text x=\"14\" y=\"{:.1f}\" font-size=\"12\" transform=\"rotate(-90 14 {:.1f})\">macro-F1 (%)</text>\n",
      kTop + plot_h / 2, kTop + plot_h / 2);

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& l = lines[i];
    const char* color = kColors[i % std::size(kColors)];
    std::string pts;
    for (const auto& [n, v] : l.points) pts += fmt::format("{}{:.2f},{:.2f}", pts.empty() ? "" : " ", x_of(n), y_of(v));
    svg += fmt::format("<polyline class=\"series\" data-method=\"{}\" data-target=\"{}\" fill=\"none\" stroke=\"{}\" "
                       "stroke-width=\"2\"{} points=\"{}\"/>\n",
                       l.method, l.target, color, l.dashed ? " stroke-dasharray=\"6,4\"" : "", pts);
    const double ly = kTop + 14.0 * static_cast<double>(i) + 6;
    svg += fmt::format("<line x1=\"{0}\" y1=\"{1:.1f}\" x2=\"{2}\" y2=\"{1:.1f}\" stroke=\"{3}\" stroke-width=\"2\"{4}/>\n",
                       kWidth - kRight + 12, ly, kWidth - kRight + 36, color,
                       l.dashed ? " stroke-dasharray=\"6,4\"" : "");
    svg += fmt::format("<text x=\"{}\" y=\"{:.1f}\" font-size=\"11\">{} {}</text>\n", kWidth - kRight + 40, ly + 4,
                       l.method, l.target);
  }
  svg += "</svg>\n";
  return svg;
}

void plot_nshot(std::span<const std::filesystem::path> reports, const std::filesystem::path& out) {
  std::vector<EvalReport> rows;
  for (const auto& path : reports) {
    auto part = read_report(path);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  const auto lines = nshot_lines(rows);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  write_file_atomic(out, render_nshot_svg(lines));
}

}  // namespace mdl::cli
