// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <map>
#include <set>

#include "mdl/errors.hpp"
#include "mdl/sampler.hpp"
#include "support.hpp"

namespace mdl {
namespace {

std::vector<Sample> make_train(const std::vector<std::pair<std::string, std::size_t>>& counts) {
  std::vector<Sample> out;
  for (const auto& [label, n] : counts) {
    for (std::size_t i = 0; i < n; ++i) out.push_back({label + " text " + std::to_string(i), label, "d", out.size()});
  }
  return out;
}

std::map<std::string, std::size_t> count_labels(const std::vector<Sample>& s) {
  std::map<std::string, std::size_t> m;
  for (const auto& x : s) ++m[x.label];
  return m;
}

const std::vector<std::string> kLabels = {"a", "b", "c"};

TEST(FewShot, FourPerLabel) {
  const auto train = make_train({{"a", 10}, {"b", 6}, {"c", 4}});
  const auto d = sample_few_shot(train, kLabels, {4, 16, 1});
  EXPECT_EQ(d.samples.size(), 12u);
  for (const auto& [l, n] : count_labels(d.samples)) EXPECT_EQ(n, 4u) << l;
  EXPECT_TRUE(d.warnings.empty());
}

TEST(FewShot, CapsRareLabelWithWarning) {
  const auto train = make_train({{"a", 500}, {"b", 11}});
  const std::vector<std::string> labels = {"a", "b"};
  const auto d = sample_few_shot(train, labels, {64, 16, 3});
  const auto counts = count_labels(d.samples);
  EXPECT_EQ(counts.at("a"), 64u);
  EXPECT_EQ(counts.at("b"), 11u);
  ASSERT_EQ(d.warnings.size(), 1u);
  EXPECT_NE(d.warnings[0].find("'b'"), std::string::npos);
}

TEST(FewShot, OneShotAndMissingLabel) {
  const std::vector<std::string> labels = {"a", "b"};
  EXPECT_EQ(sample_few_shot(make_train({{"a", 3}, {"b", 3}}), labels, {1, 16, 0}).samples.size(), 2u);
  try {
    sample_few_shot(make_train({{"a", 3}}), labels, {1, 16, 0});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos);
  }
}

TEST(FewShot, SeedDeterminismAndVariation) {
  const auto train = make_train({{"a", 400}, {"b", 400}, {"c", 400}});
  const auto a = sample_few_shot(train, kLabels, {4, 16, 9});
  const auto b = sample_few_shot(train, kLabels, {4, 16, 9});
  const auto c = sample_few_shot(train, kLabels, {4, 16, 10});
  auto uids = [](const Draw& d) {
    std::vector<std::size_t> u;
    for (const auto& s : d.samples) u.push_back(s.uid);
    return u;
  };
  EXPECT_EQ(uids(a), uids(b));
  EXPECT_NE(uids(a), uids(c));
}

TEST(Quotas, LargestRemainder) {
  const std::vector<std::size_t> half = {50, 50};
  EXPECT_EQ(largest_remainder_quotas(half, 16), (std::vector<std::size_t>{8, 8}));
  const std::vector<std::size_t> skew = {81, 13, 6};
  EXPECT_EQ(largest_remainder_quotas(skew, 16), (std::vector<std::size_t>{13, 2, 1}));
  const std::vector<std::size_t> rare = {9992, 8};
  EXPECT_EQ(largest_remainder_quotas(rare, 16), (std::vector<std::size_t>{16, 0}));
}

TEST(Validation, FollowsFullTrainDistributionAndIsDisjoint) {
  const auto train = make_train({{"a", 810}, {"b", 130}, {"c", 60}});
  const FewShotPlan plan{4, 16, 5};
  const auto shots = sample_few_shot(train, kLabels, plan);
  const auto pool = remaining_pool(train, shots.samples);
  EXPECT_EQ(pool.size(), train.size() - shots.samples.size());
  const auto valid = sample_validation(pool, train, kLabels, plan);
  const auto counts = count_labels(valid.samples);
  EXPECT_EQ(counts.at("a"), 13u);
  EXPECT_EQ(counts.at("b"), 2u);
  EXPECT_EQ(counts.at("c"), 1u);
  std::set<std::size_t> shot_ids;
  for (const auto& s : shots.samples) shot_ids.insert(s.uid);
  for (const auto& s : valid.samples) EXPECT_FALSE(shot_ids.count(s.uid));

  const auto again = sample_validation(pool, train, kLabels, plan);
  ASSERT_EQ(again.samples.size(), valid.samples.size());
  for (std::size_t i = 0; i < valid.samples.size(); ++i) EXPECT_EQ(again.samples[i].uid, valid.samples[i].uid);
}

TEST(Validation, SmallPoolTakesEverythingWithWarning) {
  const auto train = make_train({{"a", 6}, {"b", 6}});
  const std::vector<std::string> labels = {"a", "b"};
  const FewShotPlan plan{4, 16, 5};
  const auto shots = sample_few_shot(train, labels, plan);
  const auto pool = remaining_pool(train, shots.samples);
  const auto valid = sample_validation(pool, train, labels, plan);
  EXPECT_EQ(valid.samples.size(), 4u);
  EXPECT_FALSE(valid.warnings.empty());
}

TEST(Validation, ShortLabelHandsQuotaOn) {
  // Quotas 8/8, but only 3 "b" samples remain: the other 5 go to "a".
  const auto train = make_train({{"a", 100}, {"b", 100}});
  std::vector<Sample> pool;
  std::size_t b = 0;
  for (const auto& s : train) {
    if (s.label == "a" || b++ < 3) pool.push_back(s);
  }
  const std::vector<std::string> labels = {"a", "b"};
  const auto valid = sample_validation(pool, train, labels, {4, 16, 1});
  const auto counts = count_labels(valid.samples);
  EXPECT_EQ(counts.at("a"), 13u);
  EXPECT_EQ(counts.at("b"), 3u);
}

TEST(WriteDraw, AuditFile) {
  testing::TempDir dir;
  const auto train = make_train({{"a", 3}});
  write_draw(dir / "shots.tsv", train);
  const auto t = read_delimited(dir / "shots.tsv");
  EXPECT_EQ(t.header, (std::vector<std::string>{"uid", "label", "text"}));
  EXPECT_EQ(t.rows.size(), 3u);
}

}  // namespace
}  // namespace mdl
