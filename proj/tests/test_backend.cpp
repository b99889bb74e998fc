// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fake_backend.hpp"
#include "gradcheck.hpp"
#include "mdl/backend.hpp"
#include "mdl/errors.hpp"
#include "mdl/reference_backend.hpp"
#include "support.hpp"

namespace mdl {
namespace {

std::vector<std::string> words(std::initializer_list<const char*> w) { return {w.begin(), w.end()}; }

ReferenceBackend small_backend(std::size_t dim = 8, double dropout = 0.0) {
  ReferenceBackendOptions o;
  o.dim = dim;
  o.dropout = dropout;
  return ReferenceBackend(
      WordPieceVocabulary(words({"it", "was", "yes", "no", "cat", "dog", "bird", "fish", "red", "blue"})), o);
}

TEST(Vocabulary, WordPiecesAndUnknown) {
  const WordPieceVocabulary v(words({"dom", "##inance", "##ain", "it"}));
  EXPECT_EQ(v.find("[UNK]"), 0);
  EXPECT_EQ(v.find("[MASK]"), 1);
  EXPECT_EQ(v.tokenize_word("Dominance").size(), 2u);
  EXPECT_EQ(v.tokenize_word("domain").size(), 2u);
  EXPECT_EQ(v.tokenize_word("it."), std::vector<TokenId>{v.find("it")});
  EXPECT_EQ(v.tokenize_word("zebra"), std::vector<TokenId>{0});
  EXPECT_EQ(v.tokenize_text("it [MASK]").back(), 1);
}

TEST(TrainConfig, DefaultsAndValidation) {
  const TrainConfig c;
  EXPECT_EQ(c.learning_rate, 5e-5);
  EXPECT_EQ(c.batch_size, 1u);
  EXPECT_EQ(c.grad_accumulation, 16u);
  EXPECT_EQ(c.warmup_steps, 10u);
  EXPECT_EQ(c.dropout, 0.1);
  EXPECT_EQ(c.max_epochs_step1, 1u);
  EXPECT_EQ(c.early_stop_patience, 5u);
  EXPECT_EQ(c.eval_every, 100u);
  TrainConfig bad = c;
  bad.dropout = 1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.grad_accumulation = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(TrainConfig, LinearWarmup) {
  TrainConfig c;
  c.learning_rate = 1.0;
  c.warmup_steps = 10;
  EXPECT_DOUBLE_EQ(scheduled_learning_rate(c, 1), 0.1);
  EXPECT_DOUBLE_EQ(scheduled_learning_rate(c, 5), 0.5);
  EXPECT_DOUBLE_EQ(scheduled_learning_rate(c, 10), 1.0);
  EXPECT_DOUBLE_EQ(scheduled_learning_rate(c, 50), 1.0);
}

TEST(ReferenceBackend, MaskDistributionIsProperAndNearUniform) {
  auto b = small_backend(32);
  const auto p = b.mask_distribution("cat dog it was [MASK]");
  EXPECT_EQ(p.size(), b.vocab_size());
  EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);
  const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
  EXPECT_LT(*hi / *lo, 2.0);
}

TEST(ReferenceBackend, MaskCountErrors) {
  auto b = small_backend();
  EXPECT_THROW(b.mask_distribution("cat dog"), ConfigError);
  EXPECT_THROW(b.mask_distribution("[MASK] cat [MASK]"), ConfigError);
}

TEST(ReferenceBackend, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 100; seed < 103; ++seed) {
    auto inst = testing::random_grad_instance(seed);
    const LabelExample ex{inst.prompted, &inst.label_subwords, inst.gold};
    const auto r = testing::finite_difference_check(inst.backend, ex);
    EXPECT_LT(r.max_relative_error, 1e-4) << "seed " << seed;
    EXPECT_EQ(r.checked, inst.backend.parameter_count());
  }
}

TEST(ReferenceBackend, SnapshotRestoreIsBitExact) {
  auto b = small_backend(8, 0.1);
  const Verbalizer v({{"y", "yes"}, {"n", "no"}});
  const auto ls = verbalizer_subwords(v, b);
  const Snapshot s = b.snapshot();
  const auto before = b.mask_distribution("cat it was [MASK]");
  TrainConfig c;
  c.learning_rate = 0.05;
  c.grad_accumulation = 1;
  c.warmup_steps = 1;
  UpdateScheduler sched(b, c);
  const std::vector<LabelExample> batch = {{"cat it was [MASK]", &ls, 0}};
  for (int i = 0; i < 5; ++i) sched.label_step(batch);
  EXPECT_NE(b.mask_distribution("cat it was [MASK]"), before);
  b.restore(s);
  EXPECT_EQ(b.mask_distribution("cat it was [MASK]"), before);
  EXPECT_TRUE(b.snapshot().bitwise_equal(s));

  testing::TempDir dir;
  write_snapshot(dir / "m.snap", s);
  const Snapshot back = read_snapshot(dir / "m.snap");
  EXPECT_TRUE(back.bitwise_equal(s));
  EXPECT_EQ(back.seed, s.seed);
  std::string bytes = read_file(dir / "m.snap");
  bytes[bytes.size() / 2] ^= 0x1;
  write_file_atomic(dir / "bad.snap", bytes);
  EXPECT_THROW(read_snapshot(dir / "bad.snap"), ConfigError);
  auto other = small_backend(4);
  EXPECT_THROW(other.restore(s), ConfigError);
}

TEST(ReferenceBackend, TrajectoryReproducibleUnderSeed) {
  auto run = [](std::uint64_t seed) {
    auto b = small_backend(8, 0.3);
    b.set_seed(seed);
    const Verbalizer v({{"y", "yes"}, {"n", "no"}});
    const auto ls = verbalizer_subwords(v, b);
    TrainConfig c;
    c.learning_rate = 0.02;
    c.grad_accumulation = 2;
    UpdateScheduler sched(b, c);
    const std::vector<LabelExample> a = {{"cat dog it was [MASK]", &ls, 0}};
    const std::vector<LabelExample> n = {{"fish bird it was [MASK]", &ls, 1}};
    for (int i = 0; i < 10; ++i) {
      sched.label_step(a);
      sched.label_step(n);
      b.accumulate_mlm("red blue cat dog fish", 0.0);
    }
    return b.snapshot();
  };
  EXPECT_TRUE(run(4).bitwise_equal(run(4)));
  EXPECT_FALSE(run(4).bitwise_equal(run(5)));
}

TEST(ReferenceBackend, ConvergesOnSingleAnswerFixture) {
  auto b = small_backend(16, 0.1);
  const Verbalizer v({{"y", "yes"}, {"n", "no"}});
  const auto ls = verbalizer_subwords(v, b);
  TrainConfig c;
  c.learning_rate = 0.03;
  c.grad_accumulation = 1;
  UpdateScheduler sched(b, c);
  const char* texts[] = {"cat dog", "bird", "fish red", "blue cat"};
  for (int i = 0; sched.updates() < 200; ++i) {
    const std::vector<LabelExample> batch = {{std::string(texts[i % 4]) + " it was [MASK]", &ls, 0}};
    sched.label_step(batch);
  }
  const auto yes = static_cast<std::size_t>(b.vocabulary().find("yes"));
  for (const char* t : texts) EXPECT_GT(b.mask_distribution(std::string(t) + " it was [MASK]")[yes], 0.9) << t;
}

TEST(ReferenceBackend, LossFallsOverFirstTenUpdatesAtDefaultRate) {
  auto b = small_backend(32, 0.0);
  const Verbalizer v({{"y", "yes"}, {"n", "no"}});
  const auto ls = verbalizer_subwords(v, b);
  TrainConfig c;
  c.batch_size = 2;
  c.grad_accumulation = 1;
  UpdateScheduler sched(b, c);
  const std::vector<LabelExample> batch = {{"cat dog it was [MASK]", &ls, 0}, {"fish bird it was [MASK]", &ls, 1}};
  std::vector<double> losses;
  for (int i = 0; i < 11; ++i) losses.push_back(sched.label_step(batch).loss);
  EXPECT_LT(losses.back(), losses.front());
}

TEST(ReferenceBackend, OneLabelLossIsZero) {
  auto b = small_backend();
  const Verbalizer v(std::vector<std::pair<std::string, std::string>>{{"only", "yes"}});
  const auto ls = verbalizer_subwords(v, b);
  EXPECT_EQ(b.accumulate_label({"cat it was [MASK]", &ls, 0}, 1.0), 0.0);
}

TEST(ReferenceBackend, MlmMaskCounts) {
  EXPECT_EQ(ReferenceBackend::mlm_mask_count(1), 1u);
  EXPECT_EQ(ReferenceBackend::mlm_mask_count(20), 3u);
  EXPECT_EQ(ReferenceBackend::mlm_mask_count(7), 2u);
  auto b = small_backend();
  b.set_seed(3);
  const auto first = b.accumulate_mlm("cat", 1.0);
  EXPECT_EQ(first.masked_positions, std::vector<std::size_t>{0});
  std::string twenty;
  const char* pool[] = {"cat", "dog", "bird", "fish", "red"};
  for (int i = 0; i < 20; ++i) twenty += std::string(i ? " " : "") + pool[i % 5];
  b.set_seed(9);
  const auto a = b.accumulate_mlm(twenty, 1.0);
  b.set_seed(9);
  const auto again = b.accumulate_mlm(twenty, 1.0);
  EXPECT_EQ(a.masked_positions.size(), 3u);
  EXPECT_EQ(a.masked_positions, again.masked_positions);
}

TEST(UpdateScheduler, AccumulationWindowsAndFlush) {
  auto b = small_backend();
  const Verbalizer v({{"y", "yes"}, {"n", "no"}});
  const auto ls = verbalizer_subwords(v, b);
  TrainConfig c;
  c.grad_accumulation = 4;
  UpdateScheduler sched(b, c);
  const std::vector<LabelExample> batch = {{"cat it was [MASK]", &ls, 0}};
  std::size_t applied = 0;
  for (int i = 0; i < 10; ++i) applied += sched.label_step(batch).updated ? 1 : 0;
  EXPECT_EQ(applied, 2u);
  EXPECT_EQ(sched.updates(), 2u);
  EXPECT_EQ(sched.micro_steps(), 10u);
  EXPECT_TRUE(sched.flush());
  EXPECT_EQ(sched.updates(), 3u);
  EXPECT_FALSE(sched.flush());
}

class NanBackend final : public ModelBackend {
 public:
  std::vector<TokenId> tokenize(std::string_view) const override { return {1}; }
  bool is_unknown(TokenId) const override { return false; }
  std::string id() const override { return "nan"; }
  std::string_view mask_token() const override { return "[MASK]"; }
  std::size_t vocab_size() const override { return 2; }
  std::vector<double> mask_distribution(std::string_view) const override { return {0.5, 0.5}; }
  double accumulate_label(const LabelExample&, double) override { return std::nan(""); }
  MlmOutcome accumulate_mlm(std::string_view, double) override { return {INFINITY, {}}; }
  void apply_update(double, double) override {}
  void reset_optimizer() override {}
  void set_seed(std::uint64_t) override {}
  void set_dropout(double) override {}
  Snapshot snapshot() const override { return {}; }
  void restore(const Snapshot&) override {}
  std::unique_ptr<ModelBackend> clone() const override { return std::make_unique<NanBackend>(); }
};

TEST(UpdateScheduler, NonFiniteLossAborts) {
  NanBackend b;
  LabelSubwords ls{{"a"}, {{1}}};
  UpdateScheduler sched(b, TrainConfig{});
  const std::vector<LabelExample> batch = {{"x [MASK]", &ls, 0}};
  EXPECT_THROW(sched.label_step(batch), TrainingError);
  EXPECT_THROW(sched.mlm_step("x"), TrainingError);
}

}  // namespace
}  // namespace mdl
