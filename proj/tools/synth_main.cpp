// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

// Writes the synthetic corpora used by the tests and the sample configs.

#include <CLI11.hpp>
#include <iostream>

#include "mdl/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Write synthetic manifests"};
  app.require_subcommand(1);
  std::string dir;
  std::uint64_t seed = 7;
  bool related = false;
  std::size_t per_label = 6;
  auto* behavior = app.add_subcommand("behavior", "Keyword-labelled externals plus one target");
  behavior->add_option("dir", dir)->required();
  behavior->add_option("--seed", seed);
  behavior->add_flag("--related", related, "Also write a related dataset");
  auto* setup = app.add_subcommand("setup", "Full 9 external / 13 target layout with tiny data");
  setup->add_option("dir", dir)->required();
  setup->add_option("--per-label", per_label);
  CLI11_PARSE(app, argc, argv);

  std::filesystem::path manifest;
  if (behavior->parsed()) {
    mdl::BehaviorFixtureOptions options;
    options.seed = seed;
    options.with_related = related;
    manifest = mdl::write_behavior_fixture(dir, options);
  } else {
    manifest = mdl::write_setup_manifest(dir, per_label);
  }
  std::cout << manifest.string() << '\n';
  return 0;
}
