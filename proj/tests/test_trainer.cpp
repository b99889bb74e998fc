// Copyright 2026 The MDL Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <map>
#include <set>

#include "fake_backend.hpp"
#include "mdl/errors.hpp"
#include "mdl/reference_backend.hpp"
#include "mdl/sampler.hpp"
#include "mdl/synthetic.hpp"
#include "mdl/trainer.hpp"
#include "support.hpp"

namespace mdl {
namespace {

using testing::TempDir;

TrainConfig desk_config() {
  TrainConfig c;
  c.learning_rate = 0.01;
  c.grad_accumulation = 4;
  c.warmup_steps = 5;
  c.eval_every = 10;
  c.max_updates = 150;
  return c;
}

ReferenceBackend backend_for(const Corpus& corpus, std::size_t dim = 64) {
  ReferenceBackendOptions o;
  o.dim = dim;
  return ReferenceBackend(vocabulary_from_corpus(corpus), o);
}

Task toy_task(const std::string& id, std::size_t n, const SubwordTokenizer& tok) {
  std::vector<Sample> train;
  for (std::size_t i = 0; i < n; ++i) train.push_back({"x", i % 2 ? "a" : "b", id, i});
  return make_task(id, Pvp{"p", Pattern::classification(), Verbalizer({{"a", "wa"}, {"b", "wb"}})}, train, {}, tok);
}

TEST(Schedule, ProportionalFrequenciesAndSingleVisit) {
  const testing::TableTokenizer tok({{"wa", {1}}, {"wb", {2}}});
  const std::vector<Task> tasks = {toy_task("s", 100, tok), toy_task("m", 200, tok), toy_task("l", 700, tok)};
  const auto schedule = external_schedule(tasks, 1, 42);
  ASSERT_EQ(schedule.size(), 1000u);
  std::vector<std::size_t> steps(3, 0);
  std::vector<std::set<std::size_t>> seen(3);
  for (const auto& b : schedule) {
    ++steps[b.task];
    for (std::size_t i : b.samples) EXPECT_TRUE(seen[b.task].insert(i).second);
  }
  EXPECT_EQ(steps, (std::vector<std::size_t>{100, 200, 700}));
  // Batches interleave rather than running dataset by dataset.
  std::size_t switches = 0;
  for (std::size_t i = 1; i < schedule.size(); ++i) switches += schedule[i].task != schedule[i - 1].task;
  EXPECT_GT(switches, 100u);

  const auto batched = external_schedule(tasks, 3, 42);
  std::vector<std::size_t> batch_steps(3, 0);
  for (const auto& b : batched) ++batch_steps[b.task];
  EXPECT_EQ(batch_steps, (std::vector<std::size_t>{34, 67, 234}));
}

TEST(TrainExternal, EmptyExternalsReturnStart) {
  const testing::FixedBackend b({{"wa", {1}}}, {0.5, 0.5});
  const auto start = b.snapshot();
  const auto r = train_external(b, start, {}, TrainConfig{}, 1);
  EXPECT_TRUE(r.model.bitwise_equal(start));
  EXPECT_EQ(r.updates, 0u);
  EXPECT_EQ(r.warnings.size(), 1u);
}

TEST(AdaptTarget, FrozenBackendStopsAfterPatience) {
  const testing::FixedBackend b({{"wa", {1}}, {"wb", {2}}}, {0.2, 0.5, 0.3});
  Task task = toy_task("t", 8, b);
  task.valid = task.train;
  TrainConfig c;
  c.grad_accumulation = 1;
  c.eval_every = 1;
  c.early_stop_patience = 5;
  const auto r = adapt_target(b, b.snapshot(), task, c, 3);
  EXPECT_EQ(r.evaluations, 5u);
  EXPECT_TRUE(r.early_stopped);
  EXPECT_EQ(r.updates, 5u);
  EXPECT_EQ(r.best_evaluation, 0u);
}

class Behavior : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir();
    BehaviorFixtureOptions o;
    o.with_related = true;
    manifest_ = new std::filesystem::path(write_behavior_fixture(dir_->path(), o));
  }
  static void TearDownTestSuite() {
    delete manifest_;
    delete dir_;
  }
  static Corpus corpus(const std::vector<std::string>& ids, const std::string& name) {
    return load_manifest(testing::subset_manifest(*manifest_, ids, name));
  }
  static RunDescriptor descriptor(MethodKind m, std::vector<std::uint64_t> seeds = {1, 2}) {
    RunDescriptor d;
    d.method = m;
    d.target = "target";
    d.seeds_step2 = std::move(seeds);
    d.config = desk_config();
    if (requires_related(m)) d.related = "rel";
    return d;
  }
  static TempDir* dir_;
  static std::filesystem::path* manifest_;
};
TempDir* Behavior::dir_ = nullptr;
std::filesystem::path* Behavior::manifest_ = nullptr;

TEST_F(Behavior, AdaptedModelNeverWorseThanStartOnValidation) {
  const Corpus c = load_manifest(*manifest_);
  const auto b = backend_for(c);
  const auto& t = c.dataset("target");
  const auto shots = sample_few_shot(t.samples.train, t.spec.labels, {4, 16, 1});
  const auto valid = sample_validation(remaining_pool(t.samples.train, shots.samples), t.samples.train,
                                       t.spec.labels, {4, 16, 1});
  const Task task = make_task("target", t.pvp, shots.samples, valid.samples, b);
  const auto r = adapt_target(b, b.snapshot(), task, desk_config(), 5);
  const std::vector<Task> one = {task};
  auto m = b.clone();
  m->restore(r.model);
  EXPECT_GE(validation_score(*m, one), validation_score(b, one));
  EXPECT_EQ(validation_score(*m, one), r.best_score);
}

TEST(AdaptTarget, SeparableFourShotReachesPerfectValidation) {
  TempDir dir;
  std::vector<std::pair<std::string, std::string>> rows;
  for (int i = 0; i < 40; ++i) {
    rows.emplace_back("filler words apple more " + std::to_string(i % 5), "fruit");
    rows.emplace_back("filler words engine more " + std::to_string(i % 5), "car");
  }
  testing::write_rows(dir / "t.tsv", rows);
  nlohmann::ordered_json m;
  m["datasets"] = {testing::dataset_node("t", "T", "target", {"fruit", "car"}, "t.tsv", "t.tsv")};
  write_file_atomic(dir / "m.json", m.dump());
  const Corpus c = load_manifest(dir / "m.json");
  const auto b = backend_for(c, 16);
  const auto& t = c.dataset("t");
  const auto shots = sample_few_shot(t.samples.train, t.spec.labels, {4, 16, 2});
  const auto valid = sample_validation(remaining_pool(t.samples.train, shots.samples), t.samples.train,
                                       t.spec.labels, {4, 16, 2});
  const Task task = make_task("t", t.pvp, shots.samples, valid.samples, b);
  const auto r = adapt_target(b, b.snapshot(), task, desk_config(), 1);
  EXPECT_EQ(r.best_score, 1.0);
  // Saturated on its training shots too.
  auto trained = b.clone();
  trained->restore(r.model);
  const auto cm = evaluate(*trained, task, task.train);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < cm.size(); ++i) correct += cm.at(i, i);
  EXPECT_EQ(correct, task.train.size());
}

TEST_F(Behavior, MdlWithoutExternalsIsLmBase) {
  const Corpus c = corpus({"target"}, "only_target.json");
  const auto b = backend_for(c);
  Experiment e(c, b);
  const auto mdl = e.run(descriptor(MethodKind::kMdl));
  const auto base = e.run(descriptor(MethodKind::kLmBase));
  EXPECT_EQ(mdl.seed_macro_f1, base.seed_macro_f1);
  ASSERT_EQ(mdl.per_label.size(), base.per_label.size());
  for (std::size_t i = 0; i < mdl.per_label.size(); ++i) {
    EXPECT_EQ(mdl.per_label[i].mean, base.per_label[i].mean);
    EXPECT_EQ(mdl.per_label[i].std, base.per_label[i].std);
  }
}

TEST_F(Behavior, MdlSpecWithoutRemovalsIsMdl) {
  const Corpus c = load_manifest(*manifest_);
  const auto b = backend_for(c);
  Experiment e(c, b);
  auto spec = descriptor(MethodKind::kMdlSpec);
  spec.external_only_labels = LabelRemovals{};
  const auto s = e.run(spec);
  const auto m = e.run(descriptor(MethodKind::kMdl));
  EXPECT_EQ(s.seed_macro_f1, m.seed_macro_f1);
  for (std::size_t i = 0; i < s.per_label.size(); ++i) EXPECT_EQ(s.per_label[i].mean, m.per_label[i].mean);

  // A fresh experiment that filters explicitly with empty lists agrees too.
  std::vector<std::string> warnings;
  const auto tasks = remove_labels({make_task(c.dataset("ext_hate"), b)}, LabelRemovals{{"ext_hate", {}}}, b, warnings);
  EXPECT_EQ(tasks.size(), 1u);
  EXPECT_TRUE(warnings.empty());
}

TEST_F(Behavior, CrossVariantsAgreeWithoutExternals) {
  const Corpus c = corpus({"target", "rel"}, "target_rel.json");
  const auto b = backend_for(c);
  std::vector<std::vector<double>> results;
  for (auto m : {MethodKind::kCrossJoint, MethodKind::kCross3Steps, MethodKind::kCrossSingle}) {
    Experiment e(c, b);
    results.push_back(e.run(descriptor(m)).seed_macro_f1);
  }
  EXPECT_EQ(results[0], results[2]);
  EXPECT_EQ(results[1], results[2]);
}

TEST_F(Behavior, SingleRelatedBeatsMdlWhenRelatedMatchesTarget) {
  const Corpus c = load_manifest(*manifest_);
  const auto b = backend_for(c);
  Experiment e(c, b);
  const auto single = e.run(descriptor(MethodKind::kCrossSingle, {1, 2, 3, 4, 5}));
  const auto mdl = e.run(descriptor(MethodKind::kMdl, {1, 2, 3, 4, 5}));
  EXPECT_GT(single.macro_mean, mdl.macro_mean);
}

TEST_F(Behavior, ExternalModelCachedAcrossSharingTargets) {
  const Corpus c = load_manifest(*manifest_);
  const auto b = backend_for(c);
  MemoryModelCache cache;
  Experiment e(c, b, {1, nullptr, &cache, std::nullopt});
  const auto first = e.train_external_model(descriptor(MethodKind::kMdl));
  auto other = descriptor(MethodKind::kMdl);
  other.n_shots = 8;
  const auto second = e.train_external_model(other);
  EXPECT_TRUE(first.bitwise_equal(second));
  EXPECT_EQ(e.phases_trained(), 1u);
  EXPECT_EQ(e.cache_hits(), 1u);

  Experiment fresh(c, b);
  EXPECT_TRUE(fresh.train_external_model(descriptor(MethodKind::kMdl)).bitwise_equal(first));
  EXPECT_FALSE(first.bitwise_equal(e.initial_snapshot()));
}

TEST_F(Behavior, MlmVisitsEveryExternalTextOnce) {
  const Corpus c = load_manifest(*manifest_);
  const auto b = backend_for(c);
  std::vector<Task> tasks;
  std::size_t texts = 0;
  for (const auto& spec : c.specs_with_role(DatasetRole::kExternal)) {
    tasks.push_back(make_task(c.dataset(spec.id), b));
    texts += tasks.back().train.size();
  }
  auto config = desk_config();
  const auto r = train_mlm(b, b.snapshot(), tasks, config, 7);
  EXPECT_EQ(r.micro_steps, texts);
  std::size_t steps = 0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    EXPECT_EQ(r.dataset_steps[i], tasks[i].train.size());
    steps += r.dataset_steps[i];
  }
  EXPECT_EQ(steps, texts);
  EXPECT_EQ(r.updates, (texts + config.grad_accumulation - 1) / config.grad_accumulation);
}

TEST(RemoveLabels, ShrinksVerbalizerAndDropsEmptiedDatasets) {
  const testing::TableTokenizer tok({{"stereotype", {1}},
                                     {"dominance", {2}},
                                     {"derailing", {3}},
                                     {"harassment", {4}},
                                     {"discredit", {5}},
                                     {"wa", {6}},
                                     {"wb", {7}}});
  const Verbalizer v({{"stereotype", "stereotype"},
                      {"dominance", "dominance"},
                      {"derailing", "derailing"},
                      {"sexual_harassment", "harassment"},
                      {"discredit", "discredit"}});
  std::vector<Sample> train;
  const auto labels = v.labels();
  for (std::size_t i = 0; i < 50; ++i) train.push_back({"x", labels[i % 5], "ami", i});
  std::vector<Task> tasks = {make_task("ami", Pvp{"p", Pattern::classification(), v}, train, train, tok),
                             toy_task("small", 10, tok)};
  std::vector<std::string> warnings;
  const auto kept = remove_labels(tasks, {{"ami", {"derailing"}}}, tok, warnings);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].pvp.verbalizer.size(), 4u);
  EXPECT_FALSE(kept[0].pvp.verbalizer.contains("derailing"));
  EXPECT_EQ(kept[0].train.size(), 40u);
  EXPECT_EQ(kept[0].valid.size(), 40u);
  EXPECT_EQ(kept[0].label_subwords.labels.size(), 4u);

  const auto dropped = remove_labels(tasks, {{"small", {"a", "b"}}}, tok, warnings);
  ASSERT_EQ(dropped.size(), 1u);
  EXPECT_EQ(dropped[0].dataset_id, "ami");
  EXPECT_EQ(warnings.size(), 1u);
  const auto schedule = external_schedule(dropped, 1, 0);
  EXPECT_EQ(schedule.size(), 50u);
}

TEST_F(Behavior, SeedsAndSweep) {
  const Corpus c = load_manifest(*manifest_);
  const auto b = backend_for(c, 16);
  Experiment e(c, b);
  auto d = descriptor(MethodKind::kLmBase, {1, 2, 3, 4, 5});
  d.config.max_updates = 20;
  const auto five = e.run(d);
  EXPECT_EQ(five.seed_count, 5u);
  EXPECT_EQ(five.seed_macro_f1.size(), 5u);
  d.seeds_step2 = {3};
  EXPECT_EQ(e.run(d).macro_std, 0.0);

  const auto sweep = expand_nshot_sweep(d);
  std::vector<std::size_t> ns;
  for (const auto& s : sweep) ns.push_back(s.n_shots);
  EXPECT_EQ(ns, (std::vector<std::size_t>{1, 4, 8, 16, 32, 64}));

  auto mtl = descriptor(MethodKind::kMtl, {1, 2, 3, 4, 5});
  mtl.config.max_updates = 20;
  EXPECT_EQ(e.run(mtl).seed_count, 1u);
}

TEST_F(Behavior, ParallelSeedsMatchSequential) {
  const Corpus c = load_manifest(*manifest_);
  const auto b = backend_for(c, 16);
  auto d = descriptor(MethodKind::kMdl, {1, 2, 3, 4});
  Experiment seq(c, b);
  Experiment par(c, b, {3, nullptr, nullptr, std::nullopt});
  const auto a = seq.run(d);
  const auto p = par.run(d);
  EXPECT_EQ(format_report(std::vector<EvalReport>{a}), format_report(std::vector<EvalReport>{p}));
  EXPECT_EQ(a.seed_macro_f1, p.seed_macro_f1);
}

TEST_F(Behavior, DescriptorValidation) {
  const Corpus c = load_manifest(*manifest_);
  auto d = descriptor(MethodKind::kCrossSingle);
  d.related.reset();
  EXPECT_THROW(d.validate(c), ConfigError);
  d = descriptor(MethodKind::kMdl);
  d.related = "rel";
  EXPECT_THROW(d.validate(c), ConfigError);
  d = descriptor(MethodKind::kMdl);
  d.target = "ext_hate";
  EXPECT_THROW(d.validate(c), ConfigError);
  d.target = "missing";
  EXPECT_THROW(d.validate(c), ConfigError);
  EXPECT_THROW(parse_method("BOGUS"), ConfigError);
  EXPECT_EQ(parse_method("CROSS_3STEPS"), MethodKind::kCross3Steps);
}

}  // namespace
}  // namespace mdl
