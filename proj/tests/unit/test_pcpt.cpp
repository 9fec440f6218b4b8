#include <gtest/gtest.h>

#include <json.hpp>
#include <set>
#include <sstream>

#include "test_util.hpp"
#include "tracemark/pcpt.hpp"
#include "tracemark/synth.hpp"

using namespace tracemark;

namespace {

media::TriggerSet fake_triggers(std::size_t n, int label, std::uint64_t seed, std::string user = "alice") {
  media::TriggerSet t;
  t.user_id = std::move(user);
  t.label = label;
  for (std::size_t i = 0; i < n; ++i) t.images.push_back(testutil::random_image(28, 28, seed + i));
  return t;
}

nn::LabeledDataset numbered(std::size_t n) {
  nn::LabeledDataset d;
  d.shape = {1, 1, 1};
  d.num_classes = 10;
  for (std::size_t i = 0; i < n; ++i) d.add(std::vector<float>{static_cast<float>(i)}, static_cast<int>(i % 10));
  return d;
}

// Small end-to-end fixture shared by the slower tests.
struct Mini {
  nn::LabeledDataset train, test;
  nn::ModelSnapshot base;
  media::TriggerSet alice, bob;
};

const Mini& mini() {
  static const Mini m = [] {
    Mini f;
    f.train = synth::digits(1000, 1);
    f.test = synth::digits(300, 2);
    nn::TrainConfig cfg;
    cfg.epochs = 3;
    f.base = nn::train(nn::desk_cnn({1, 28, 28}, 10, 1), f.train, cfg);
    f.alice = media::select_triggers(synth::video(synth::Scene::kFlashcardRing, 80, 3), 30, 8, "alice", 10);
    f.bob = media::select_triggers(synth::video(synth::Scene::kFlashcardCross, 80, 4), 30, 8, "bob", 10);
    return f;
  }();
  return m;
}

}  // namespace

TEST(Verdict, PaperExamples) {
  const pcpt::TraceThresholds t;
  EXPECT_EQ(pcpt::decide_verdict({{"alice", 1.0}, {"bob", 0.0}}, t), "alice");
  EXPECT_EQ(pcpt::decide_verdict({{"alice", 0.03}, {"bob", 1.0}}, t), "bob");
  EXPECT_EQ(pcpt::decide_verdict({{"alice", 0.5}, {"bob", 0.5}}, t), pcpt::kTraceFailure);
  EXPECT_EQ(pcpt::decide_verdict({{"alice", 0.0}, {"bob", 0.0}}, t), pcpt::kTraceFailure);
}

TEST(Verdict, Boundaries) {
  const pcpt::TraceThresholds t;
  EXPECT_EQ(pcpt::decide_verdict({{"alice", 0.9}, {"bob", 0.95}}, t), pcpt::kTraceFailure);
  EXPECT_EQ(pcpt::decide_verdict({{"alice", 0.85}, {"bob", 0.0}}, t), pcpt::kTraceFailure);
  EXPECT_EQ(pcpt::decide_verdict({{"alice", 0.86}, {"bob", 0.60}}, t), pcpt::kTraceFailure);
  EXPECT_EQ(pcpt::decide_verdict({{"alice", 0.86}, {"bob", 0.59}}, t), "alice");
  EXPECT_EQ(pcpt::decide_verdict({{"alice", 1.0}}, t), "alice");
}

TEST(Verdict, ThresholdValidation) {
  EXPECT_ERROR_CODE((pcpt::TraceThresholds{0.5, 0.6}.validate()), ErrorCode::kInvalidInput);
  EXPECT_ERROR_CODE((pcpt::TraceThresholds{1.2, 0.6}.validate()), ErrorCode::kInvalidInput);
  pcpt::TraceThresholds{0.9, 0.1}.validate();
}

TEST(FinetuneSet, SizesAndLabels) {
  const auto data = numbered(1000);
  const auto trig = fake_triggers(100, 10, 1);
  const auto set = pcpt::build_finetune_set(data, trig, 0.1, 5);
  EXPECT_EQ(set.size(), 200U);
  EXPECT_EQ(set.num_classes, 11);
  for (std::size_t i = 100; i < 200; ++i) EXPECT_EQ(set.labels[i], 10);
  std::set<float> originals;
  for (std::size_t i = 0; i < 100; ++i) {
    originals.insert(set.inputs[i]);
    EXPECT_EQ(set.labels[i], static_cast<int>(set.inputs[i]) % 10);
  }
  EXPECT_EQ(originals.size(), 100U);
  EXPECT_EQ(pcpt::build_finetune_set(data, trig, 1.0, 5).size(), 1100U);
  EXPECT_EQ(pcpt::build_finetune_set(numbered(15), trig, 0.1, 5).size(), 102U);
}

TEST(FinetuneSet, DeterministicPerSeed) {
  const auto data = numbered(500);
  const auto trig = fake_triggers(3, 10, 1);
  EXPECT_EQ(pcpt::build_finetune_set(data, trig, 0.2, 9).inputs, pcpt::build_finetune_set(data, trig, 0.2, 9).inputs);
  EXPECT_NE(pcpt::build_finetune_set(data, trig, 0.2, 9).inputs, pcpt::build_finetune_set(data, trig, 0.2, 10).inputs);
}

TEST(FinetuneSet, Errors) {
  const auto data = numbered(10);
  EXPECT_ERROR_CODE(pcpt::build_finetune_set(data, fake_triggers(2, 10, 1), 0.0, 1), ErrorCode::kInvalidInput);
  EXPECT_ERROR_CODE(pcpt::build_finetune_set(data, fake_triggers(2, 10, 1), 1.5, 1), ErrorCode::kInvalidInput);
  EXPECT_ERROR_CODE(pcpt::build_finetune_set(data, fake_triggers(0, 10, 1), 0.5, 1), ErrorCode::kInvalidInput);
  EXPECT_ERROR_CODE(pcpt::build_finetune_set(data, fake_triggers(2, 7, 1), 0.5, 1), ErrorCode::kInvalidInput);
}

TEST(Trace, UnwatermarkedModelScoresZero) {
  const auto model = nn::desk_cnn({1, 28, 28}, 10, 4);
  const std::vector<media::TriggerSet> sets{fake_triggers(5, 10, 1, "alice"), fake_triggers(5, 10, 9, "bob")};
  const auto r = pcpt::trace(model, sets, {});
  EXPECT_EQ(r.per_user_trigger_accuracy.at("alice"), 0.0);
  EXPECT_EQ(r.per_user_trigger_accuracy.at("bob"), 0.0);
  EXPECT_EQ(r.verdict, pcpt::kTraceFailure);
  EXPECT_FALSE(r.traced());
}

TEST(Trace, WrongClassCountRejected) {
  const auto model = nn::desk_cnn({1, 28, 28}, 5, 4);
  const std::vector<media::TriggerSet> sets{fake_triggers(2, 10, 1)};
  EXPECT_ERROR_CODE(pcpt::trace(model, sets, {}), ErrorCode::kInvalidInput);
  const std::vector<media::TriggerSet> mixed{fake_triggers(2, 10, 1, "a"), fake_triggers(2, 11, 1, "b")};
  EXPECT_ERROR_CODE(pcpt::trace(nn::desk_cnn({1, 28, 28}, 10, 4), mixed, {}), ErrorCode::kInvalidInput);
}

TEST(Trace, ReportFormats) {
  pcpt::TraceReport r;
  r.per_user_trigger_accuracy = {{"alice", 1.0}, {"bob", 0.25}};
  r.verdict = "alice";
  EXPECT_EQ(r.to_text(), "trigger_accuracy.alice=1\ntrigger_accuracy.bob=0.25\nverdict=alice\n");
  std::istringstream in(r.to_ndjson());
  std::string line;
  std::vector<nlohmann::json> recs;
  while (std::getline(in, line)) recs.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(recs.size(), 3U);
  EXPECT_EQ(recs[0]["user_id"], "alice");
  EXPECT_EQ(recs[1]["trigger_accuracy"], 0.25);
  EXPECT_EQ(recs[2]["verdict"], "alice");
  EXPECT_EQ(recs[2]["traced"], true);
}

TEST(Embed, MiniPipelineTracesOwner) {
  const Mini& f = mini();
  nn::TrainConfig cfg;
  cfg.epochs = 15;
  const auto a = pcpt::embed_watermark(f.base, f.train, f.alice, cfg, 0.5);
  EXPECT_GT(a.trigger_accuracy, 0.85);
  const std::vector<media::TriggerSet> sets{f.alice, f.bob};
  const auto report = pcpt::trace(a.model, sets, {});
  EXPECT_EQ(report.verdict, "alice") << report.to_text();
  EXPECT_LE(pcpt::fidelity_report(f.base, a.model, f.test), 0.05);
  EXPECT_LE(pcpt::additional_class_rate(a.model, f.test), 0.05);

  const auto again = pcpt::embed_watermark(f.base, f.train, f.alice, cfg, 0.5);
  EXPECT_EQ(again.model, a.model);
}

TEST(Embed, ClassMismatchRejected) {
  const Mini& f = mini();
  nn::LabeledDataset wrong = f.train;
  wrong.num_classes = 11;
  EXPECT_ERROR_CODE(pcpt::embed_watermark(f.base, wrong, f.alice, {}), ErrorCode::kInvalidInput);
}

TEST(Attacks, PruneSweepRowsSortedAndZeroRateUnchanged) {
  const Mini& f = mini();
  const auto model = nn::extend_output_class(f.base);
  const std::vector<media::TriggerSet> sets{f.alice, f.bob};
  const std::vector<double> rates{0.5, 0.0, 0.9};
  const auto rows = pcpt::prune_sweep(model, rates, sets, f.test);
  ASSERT_EQ(rows.size(), 3U);
  EXPECT_EQ(rows[0].rate, 0.0);
  EXPECT_EQ(rows[2].rate, 0.9);
  EXPECT_DOUBLE_EQ(rows[0].original_accuracy, nn::accuracy(model, f.test, 10));
  for (const auto& r : rows) EXPECT_EQ(r.verdict, pcpt::kTraceFailure);
}

TEST(Attacks, FinetuneValidation) {
  const Mini& f = mini();
  const std::vector<media::TriggerSet> sets{f.alice, f.bob};
  EXPECT_ERROR_CODE(pcpt::finetune_attack(f.base, f.test, sets, {}, 0, {}), ErrorCode::kInvalidInput);
  nn::TrainConfig cfg;
  cfg.learning_rate = pcpt::kAttackLearningRate;
  const auto r = pcpt::finetune_attack(nn::extend_output_class(f.base), f.test, sets, {}, 1, cfg);
  ASSERT_TRUE(r.report.original_task_accuracy.has_value());
  EXPECT_GT(*r.report.original_task_accuracy, 0.5);
  EXPECT_EQ(r.model.num_classes, 11);
}
