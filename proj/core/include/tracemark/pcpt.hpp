#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tracemark/media.hpp"
#include "tracemark/nn.hpp"

namespace tracemark::pcpt {

inline constexpr double kDefaultTheta1 = 0.85;
inline constexpr double kDefaultTheta2 = 0.60;
inline constexpr double kDefaultFraction = 0.10;
inline constexpr int kDefaultEpochs = 50;
inline constexpr double kAttackLearningRate = 0.001;
inline constexpr std::string_view kTraceFailure = "traceability failure";

struct TraceThresholds {
  double theta1 = kDefaultTheta1;
  double theta2 = kDefaultTheta2;

  void validate() const;
};

struct TraceReport {
  std::map<std::string, double> per_user_trigger_accuracy;
  std::string verdict;  // a user id or kTraceFailure
  std::optional<double> original_task_accuracy;

  bool traced() const { return verdict != kTraceFailure; }

  /// key=value lines, one per field / user.
  std::string to_text() const;
  /// One JSON object per user plus a closing verdict object, newline separated.
  std::string to_ndjson() const;
};

/// Trigger images converted to model inputs, all labelled `set.label`.
nn::LabeledDataset trigger_dataset(const media::TriggerSet& set, const nn::Shape& shape, int num_classes);

/// Share of the set's images the model assigns to the additional class
/// (`set.label`). A model without that output scores 0.
double trigger_accuracy(const nn::ModelSnapshot& model, const media::TriggerSet& set);

/// Unique-winner rule: the user above theta1 while every other user is
/// below theta2; anything else is a traceability failure.
std::string decide_verdict(const std::map<std::string, double>& accuracy, const TraceThresholds& t);

/// ceil(fraction * |data|) originals sampled without replacement plus every
/// trigger image labelled N; the result has N + 1 classes.
nn::LabeledDataset build_finetune_set(const nn::LabeledDataset& data, const media::TriggerSet& triggers,
                                      double fraction, std::uint64_t seed);

struct EmbedResult {
  nn::ModelSnapshot model;
  double trigger_accuracy = 0.0;
};

EmbedResult embed_watermark(const nn::ModelSnapshot& base, const nn::LabeledDataset& data,
                            const media::TriggerSet& triggers, const nn::TrainConfig& cfg,
                            double fraction = kDefaultFraction);

/// Accepts the watermarked (N + 1 classes) model as well as the
/// unwatermarked N-class one, which can never emit class N.
TraceReport trace(const nn::ModelSnapshot& suspect, std::span<const media::TriggerSet> trigger_sets,
                  const TraceThresholds& thresholds);

/// accuracy(base) - accuracy(watermarked restricted to its first N outputs).
double fidelity_report(const nn::ModelSnapshot& base, const nn::ModelSnapshot& watermarked,
                       const nn::LabeledDataset& test);

/// Share of `test` inputs for which the watermarked model predicts the
/// additional class.
double additional_class_rate(const nn::ModelSnapshot& watermarked, const nn::LabeledDataset& test);

struct AttackResult {
  nn::ModelSnapshot model;
  TraceReport report;  // original_task_accuracy measured on the held-back half
};

/// Seeded shuffle of `test`, first half used to fine-tune (original labels,
/// all N + 1 outputs kept), second half for the original-task accuracy.
AttackResult finetune_attack(const nn::ModelSnapshot& model, const nn::LabeledDataset& test,
                             std::span<const media::TriggerSet> trigger_sets, const TraceThresholds& thresholds,
                             int epochs, nn::TrainConfig cfg);

struct PruneRow {
  double rate = 0.0;
  double original_accuracy = 0.0;
  std::map<std::string, double> trigger_accuracy;
  std::string verdict;
};

std::vector<PruneRow> prune_sweep(const nn::ModelSnapshot& model, std::span<const double> rates,
                                  std::span<const media::TriggerSet> trigger_sets, const nn::LabeledDataset& test,
                                  const TraceThresholds& thresholds = {});

}  // namespace tracemark::pcpt
