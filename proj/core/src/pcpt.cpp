#include "tracemark/pcpt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "tracemark/error.hpp"
#include "tracemark/random.hpp"

namespace tracemark::pcpt {

void TraceThresholds::validate() const {
  if (!(theta1 >= 0.0 && theta1 <= 1.0 && theta2 >= 0.0 && theta2 <= 1.0)) {
    fail(ErrorCode::kInvalidInput, "thresholds must lie in [0, 1]");
  }
  if (!(theta2 < theta1)) fail(ErrorCode::kInvalidInput, "theta2 must be smaller than theta1");
}

std::string TraceReport::to_text() const {
  std::ostringstream out;
  for (const auto& [user, acc] : per_user_trigger_accuracy) out << "trigger_accuracy." << user << "=" << acc << "\n";
  if (original_task_accuracy) out << "original_task_accuracy=" << *original_task_accuracy << "\n";
  out << "verdict=" << verdict << "\n";
  return out.str();
}

std::string TraceReport::to_ndjson() const {
  std::string out;
  for (const auto& [user, acc] : per_user_trigger_accuracy) {
    nlohmann::ordered_json rec;
    rec["user_id"] = user;
    rec["trigger_accuracy"] = acc;
    out += rec.dump() + "\n";
  }
  nlohmann::ordered_json summary;
  summary["verdict"] = verdict;
  summary["traced"] = traced();
  if (original_task_accuracy) summary["original_task_accuracy"] = *original_task_accuracy;
  out += summary.dump() + "\n";
  return out;
}

nn::LabeledDataset trigger_dataset(const media::TriggerSet& set, const nn::Shape& shape, int num_classes) {
  nn::LabeledDataset data;
  data.shape = shape;
  data.num_classes = num_classes;
  for (const RgbImage& img : set.images) {
    data.add(media::to_tensor(img, shape.channels, shape.height, shape.width), set.label);
  }
  return data;
}

double trigger_accuracy(const nn::ModelSnapshot& model, const media::TriggerSet& set) {
  if (set.images.empty()) fail(ErrorCode::kInvalidInput, "trigger set " + set.user_id + " is empty");
  if (set.label >= model.num_classes) return 0.0;
  return nn::accuracy(model, trigger_dataset(set, model.input, model.num_classes));
}

std::string decide_verdict(const std::map<std::string, double>& accuracy, const TraceThresholds& t) {
  t.validate();
  std::string winner;
  for (const auto& [user, acc] : accuracy) {
    if (acc <= t.theta1) continue;
    if (!winner.empty()) return std::string(kTraceFailure);
    winner = user;
  }
  if (winner.empty()) return std::string(kTraceFailure);
  for (const auto& [user, acc] : accuracy) {
    if (user != winner && !(acc < t.theta2)) return std::string(kTraceFailure);
  }
  return winner;
}

nn::LabeledDataset build_finetune_set(const nn::LabeledDataset& data, const media::TriggerSet& triggers,
                                      double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) fail(ErrorCode::kInvalidInput, "fraction must lie in (0, 1]");
  if (triggers.images.empty()) fail(ErrorCode::kInvalidInput, "trigger set is empty");
  if (triggers.label != data.num_classes) {
    fail(ErrorCode::kInvalidInput, "trigger label " + std::to_string(triggers.label) +
                                       " must equal the additional class index " + std::to_string(data.num_classes));
  }
  // The small epsilon keeps e.g. 0.1 * 1000 from rounding up to 101.
  const auto take = std::min(
      data.size(), static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(data.size()) - 1e-9)));

  std::vector<std::size_t> pool(data.size());
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(take);

  nn::LabeledDataset out = data.subset(pool);
  out.num_classes = data.num_classes + 1;
  const nn::LabeledDataset trig = trigger_dataset(triggers, data.shape, out.num_classes);
  out.inputs.insert(out.inputs.end(), trig.inputs.begin(), trig.inputs.end());
  out.labels.insert(out.labels.end(), trig.labels.begin(), trig.labels.end());
  return out;
}

EmbedResult embed_watermark(const nn::ModelSnapshot& base, const nn::LabeledDataset& data,
                            const media::TriggerSet& triggers, const nn::TrainConfig& cfg, double fraction) {
  if (base.num_classes != data.num_classes) {
    fail(ErrorCode::kInvalidInput, "base model and dataset disagree on the class count");
  }
  const nn::LabeledDataset finetune = build_finetune_set(data, triggers, fraction, mix_seed(cfg.seed, "finetune-set"));
  EmbedResult result;
  result.model = nn::train(nn::extend_output_class(base), finetune, cfg);
  result.trigger_accuracy = trigger_accuracy(result.model, triggers);
  return result;
}

namespace {

void check_trigger_labels(std::span<const media::TriggerSet> sets) {
  if (sets.empty()) fail(ErrorCode::kInvalidInput, "at least one trigger set is required");
  for (const auto& s : sets) {
    if (s.label != sets.front().label) fail(ErrorCode::kInvalidInput, "trigger sets disagree on the additional class");
  }
}

std::map<std::string, double> evaluate_triggers(const nn::ModelSnapshot& model,
                                                std::span<const media::TriggerSet> sets) {
  std::map<std::string, double> acc;
  for (const auto& s : sets) acc[s.user_id] = trigger_accuracy(model, s);
  return acc;
}

}  // namespace

TraceReport trace(const nn::ModelSnapshot& suspect, std::span<const media::TriggerSet> trigger_sets,
                  const TraceThresholds& thresholds) {
  thresholds.validate();
  check_trigger_labels(trigger_sets);
  const int n = trigger_sets.front().label;
  if (suspect.num_classes != n && suspect.num_classes != n + 1) {
    fail(ErrorCode::kInvalidInput, "suspect has " + std::to_string(suspect.num_classes) +
                                       " classes; expected " + std::to_string(n) + " or " + std::to_string(n + 1));
  }
  TraceReport report;
  report.per_user_trigger_accuracy = evaluate_triggers(suspect, trigger_sets);
  report.verdict = decide_verdict(report.per_user_trigger_accuracy, thresholds);
  return report;
}

double fidelity_report(const nn::ModelSnapshot& base, const nn::ModelSnapshot& watermarked,
                       const nn::LabeledDataset& test) {
  if (base.input != watermarked.input) fail(ErrorCode::kInvalidInput, "models have different input shapes");
  return nn::accuracy(base, test) - nn::accuracy(watermarked, test, base.num_classes);
}

double additional_class_rate(const nn::ModelSnapshot& watermarked, const nn::LabeledDataset& test) {
  nn::LabeledDataset probe = test;
  std::fill(probe.labels.begin(), probe.labels.end(), watermarked.num_classes - 1);
  return nn::accuracy(watermarked, probe);
}

AttackResult finetune_attack(const nn::ModelSnapshot& model, const nn::LabeledDataset& test,
                             std::span<const media::TriggerSet> trigger_sets, const TraceThresholds& thresholds,
                             int epochs, nn::TrainConfig cfg) {
  if (epochs < 1) fail(ErrorCode::kInvalidInput, "finetune_attack: epochs must be >= 1");
  if (test.size() < 2) fail(ErrorCode::kInvalidInput, "finetune_attack: test set too small to split");
  std::vector<std::size_t> order(test.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  SplitMix64 rng(mix_seed(cfg.seed, "attack-split"));
  shuffle(order.begin(), order.end(), rng);
  const std::size_t half = order.size() / 2;
  const std::span<const std::size_t> all(order);

  nn::LabeledDataset attack_set = test.subset(all.first(half));
  attack_set.num_classes = model.num_classes;  // attacker keeps every output it was given
  const nn::LabeledDataset holdout = test.subset(all.subspan(half));

  cfg.epochs = epochs;
  AttackResult result;
  result.model = nn::train(model, attack_set, cfg);
  result.report = trace(result.model, trigger_sets, thresholds);
  result.report.original_task_accuracy = nn::accuracy(result.model, holdout, test.num_classes);
  return result;
}

std::vector<PruneRow> prune_sweep(const nn::ModelSnapshot& model, std::span<const double> rates,
                                  std::span<const media::TriggerSet> trigger_sets, const nn::LabeledDataset& test,
                                  const TraceThresholds& thresholds) {
  std::vector<double> sorted(rates.begin(), rates.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<PruneRow> rows;
  for (double rate : sorted) {
    const nn::ModelSnapshot pruned = nn::global_magnitude_prune(model, rate);
    PruneRow row;
    row.rate = rate;
    row.original_accuracy = nn::accuracy(pruned, test, test.num_classes);
    const TraceReport report = trace(pruned, trigger_sets, thresholds);
    row.trigger_accuracy = report.per_user_trigger_accuracy;
    row.verdict = report.verdict;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace tracemark::pcpt
