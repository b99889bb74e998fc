// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <map>
#include <set>

#include "mdl/corpus.hpp"
#include "mdl/delimited.hpp"
#include "mdl/errors.hpp"
#include "mdl/synthetic.hpp"
#include "support.hpp"

namespace mdl {
namespace {

using nlohmann::ordered_json;
using testing::TempDir;

std::string manifest_with(const std::vector<ordered_json>& datasets) {
  ordered_json m;
  m["version"] = 1;
  m["datasets"] = datasets;
  return m.dump();
}

TEST(Delimited, CsvQuotingAndTsv) {
  const auto t = parse_delimited("text,label\r\n\"a, \"\"quoted\"\"\nline\",x\r\nplain,y\n", ',');
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][0], "a, \"quoted\"\nline");
  EXPECT_EQ(t.rows[1][1], "y");
  EXPECT_THROW(parse_delimited("a,b\n1,2,3\n", ','), ConfigError);
  Table bad;
  bad.header = {"text"};
  bad.rows = {{"has\ttab"}};
  EXPECT_THROW(format_delimited(bad, '\t'), ConfigError);
}

TEST(Manifest, EmptyIsFine) {
  TempDir dir;
  EXPECT_TRUE(parse_manifest(manifest_with({}), dir.path()).datasets().empty());
}

TEST(Manifest, ExplicitSplitSizes) {
  TempDir dir;
  const std::vector<std::string> labels = {"hate", "offensive", "profanity"};
  auto rows = [&](std::size_t n) {
    std::vector<std::pair<std::string, std::string>> r;
    for (std::size_t i = 0; i < n; ++i) r.emplace_back("post " + std::to_string(i), labels[i % 3]);
    return r;
  };
  testing::write_rows(dir / "train.tsv", rows(1808));
  testing::write_rows(dir / "valid.tsv", rows(453));
  testing::write_rows(dir / "test.tsv", rows(288));
  auto node = testing::dataset_node("hasoc_fine_en", "HASOC", "target", labels, "train.tsv", "test.tsv");
  node["files"]["valid"] = "valid.tsv";
  const Corpus c = parse_manifest(manifest_with({node}), dir.path());
  const auto& s = c.dataset("hasoc_fine_en").samples;
  EXPECT_EQ(s.train.size(), 1808u);
  EXPECT_EQ(s.valid.size(), 453u);
  EXPECT_EQ(s.test.size(), 288u);
  EXPECT_EQ(s.provenance, SplitProvenance::kOfficialSplits);
}

TEST(Manifest, CanonicalizesLabels) {
  TempDir dir;
  testing::write_rows(dir / "t.csv", {{"one", "hateful"}, {"two", "none"}, {"three", "hate"}});
  auto node = testing::dataset_node("d", "S", "external", {"hateful", "normal"}, "t.csv", "t.csv");
  const Corpus c = parse_manifest(manifest_with({node}), dir.path());
  const auto& d = c.dataset("d");
  EXPECT_EQ(d.spec.labels, (std::vector<std::string>{"hate", "normal"}));
  std::map<std::string, std::string> by_text;
  for (const auto& s : d.samples.test) by_text[s.text] = s.label;
  EXPECT_EQ(by_text, (std::map<std::string, std::string>{{"one", "hate"}, {"two", "normal"}, {"three", "hate"}}));
  EXPECT_EQ(d.pvp.verbalizer.labels(), d.spec.labels);
}

TEST(Manifest, DistinctErrorsNameTheEntry) {
  TempDir dir;
  testing::write_rows(dir / "t.csv", {{"one", "a"}, {"two", "b"}});
  const auto good = testing::dataset_node("d1", "S", "external", {"a", "b"}, "t.csv", "t.csv");
  auto expect_error = [&](const std::vector<ordered_json>& nodes, const std::string& needle) {
    try {
      parse_manifest(manifest_with(nodes), dir.path());
      FAIL() << "expected an error mentioning " << needle;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  expect_error({good, good}, "d1");
  auto missing = testing::dataset_node("d2", "S", "external", {"a", "b"}, "nope.csv", "t.csv");
  expect_error({missing}, "nope.csv");
  auto bad_label = testing::dataset_node("d3", "S", "external", {"a"}, "t.csv", "t.csv");
  expect_error({bad_label}, "'b'");
}

TEST(Manifest, EmptyTextRejected) {
  TempDir dir;
  testing::write_rows(dir / "t.csv", {{"one", "a"}, {"  ", "a"}});
  const auto node = testing::dataset_node("d", "S", "external", {"a"}, "t.csv", "t.csv");
  EXPECT_THROW(parse_manifest(manifest_with({node}), dir.path()), ConfigError);
}

TEST(CanonMap, IdempotentWithOverrides) {
  LabelCanonMap overrides;
  overrides.add("sexist", "misogyny");
  overrides.add("normal", "clean");
  const auto m = LabelCanonMap::defaults().merged(overrides);
  for (const std::string x : {"sexist", "sexism", "neutral", "normal", "hateful", "active", "whatever", "clean"}) {
    EXPECT_EQ(m.canon(m.canon(x)), m.canon(x)) << x;
  }
  EXPECT_EQ(m.canon("neutral"), "clean");
  EXPECT_EQ(m.canon("sexist"), "misogyny");
}

std::vector<Sample> hundred() {
  std::vector<Sample> s;
  for (std::size_t i = 0; i < 100; ++i) s.push_back({"t" + std::to_string(i), "a", "d", i});
  return s;
}

TEST(MakeSplits, RatioArithmetic) {
  SampleSet given;
  given.train = hundred();
  const auto s = make_splits(given, SplitPolicy::kRatio8020, 4);
  EXPECT_EQ(s.train.size(), 64u);
  EXPECT_EQ(s.valid.size(), 16u);
  EXPECT_EQ(s.test.size(), 20u);
  EXPECT_EQ(s.provenance, SplitProvenance::kDerived8020);
  std::set<std::size_t> ids;
  for (const auto* split : {&s.train, &s.valid, &s.test}) {
    for (const auto& x : *split) EXPECT_TRUE(ids.insert(x.uid).second);
  }
  EXPECT_EQ(ids.size(), 100u);
}

TEST(MakeSplits, DeterministicAndSeedSensitive) {
  SampleSet given;
  given.train = hundred();
  auto test_ids = [&](std::uint64_t seed) {
    std::vector<std::size_t> ids;
    for (const auto& x : make_splits(given, SplitPolicy::kRatio8020, seed).test) ids.push_back(x.uid);
    return ids;
  };
  EXPECT_EQ(test_ids(1), test_ids(1));
  EXPECT_NE(test_ids(1), test_ids(2));
}

TEST(MakeSplits, ExplicitPassThroughAndTooFew) {
  SampleSet given;
  given.train = hundred();
  given.valid = {{"v", "a", "d", 200}};
  given.test = {{"x", "a", "d", 300}};
  const auto s = make_splits(given, SplitPolicy::kExplicitFiles, 1);
  EXPECT_EQ(s.train.size(), 100u);
  EXPECT_EQ(s.valid.size(), 1u);
  EXPECT_EQ(s.test.size(), 1u);

  SampleSet tiny;
  tiny.train = {{"a", "a", "d", 0}, {"b", "a", "d", 1}, {"c", "a", "d", 2}, {"d", "a", "d", 3}};
  EXPECT_THROW(make_splits(tiny, SplitPolicy::kRatio8020, 1), ConfigError);
}

class SetupManifest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir();
    corpus_ = new Corpus(load_manifest(write_setup_manifest(dir_->path())));
  }
  static void TearDownTestSuite() {
    delete corpus_;
    delete dir_;
  }
  static TempDir* dir_;
  static Corpus* corpus_;
};
TempDir* SetupManifest::dir_ = nullptr;
Corpus* SetupManifest::corpus_ = nullptr;

TEST_F(SetupManifest, LeakageFilter) {
  const auto externals = corpus_->specs_with_role(DatasetRole::kExternal);
  ASSERT_EQ(externals.size(), 9u);
  const auto for_ami = leakage_filter(externals, corpus_->dataset("ami_bin_it").spec);
  EXPECT_EQ(for_ami.size(), 6u);
  for (const auto& e : for_ami) EXPECT_NE(e.source_group, "AMI");
  EXPECT_EQ(leakage_filter(externals, corpus_->dataset("stormfront_bin_en").spec).size(), 9u);
  EXPECT_TRUE(leakage_filter({}, corpus_->dataset("ami_bin_it").spec).empty());
}

TEST_F(SetupManifest, FourExternalConfigurations) {
  EXPECT_EQ(distinct_external_configs(corpus_->specs_with_role(DatasetRole::kExternal),
                                      corpus_->specs_with_role(DatasetRole::kTarget))
                .size(),
            4u);
}

TEST(DistinctConfigs, ToyManifest) {
  DatasetSpec a{"a", "X"}, b{"b", "Y"}, c{"c", "Z"};
  DatasetSpec t1{"t1", "X"}, t2{"t2", "X"}, t3{"t3", "W"};
  const std::vector<DatasetSpec> externals = {a, b, c};
  EXPECT_EQ(distinct_external_configs(externals, std::vector<DatasetSpec>{t3}).size(), 1u);
  // t1 and t2 both drop "a"; t3 keeps everything.
  EXPECT_EQ(distinct_external_configs(externals, std::vector<DatasetSpec>{t1, t2}).size(), 1u);
  EXPECT_EQ(distinct_external_configs(externals, std::vector<DatasetSpec>{t1, t2, t3}).size(), 2u);
}

}  // namespace
}  // namespace mdl
