#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "phonation/adam.hpp"
#include "phonation/dataset.hpp"
#include "phonation/model.hpp"

namespace phonation {

enum class FAverage { Macro, Weighted };

struct TrainConfig {
  int batch_size = 64;
  double base_lr = 0.001;
  double anneal_factor = 0.5;
  int anneal_period = 20;  // epochs
  double weight_decay = 0.0001;
  int epochs = 100;
  std::uint64_t seed = 1;
  FAverage f_average = FAverage::Macro;

  void validate() const;
};

// lr = base_lr * anneal_factor^floor(epoch / anneal_period)
double lr_schedule(const TrainConfig& config, int epoch);

// Rows are true modes, columns predicted modes.
struct ConfusionMatrix {
  std::array<std::array<std::int64_t, kNumModes>, kNumModes> counts{};

  void add(PhonationMode truth, PhonationMode predicted);
  std::int64_t total() const;
  std::int64_t trace() const;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MetricsSummary {
  double accuracy = 0.0;
  double f_measure = 0.0;  // macro or support-weighted mean of per-class F1
  std::array<ClassMetrics, kNumModes> per_class{};
};

// Degenerate conventions: a precision/recall with zero denominator is 0, and
// F1 is 0 whenever precision + recall is 0.
MetricsSummary metrics_from_confusion(const ConfusionMatrix& cm,
                                      FAverage average = FAverage::Macro);

struct EpochStats {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;     // mean cross entropy over the epoch's samples
  double val_accuracy = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  int best_epoch = -1;
  double best_val_accuracy = 0.0;
  std::string final_rng_state;  // shuffle rng after the last epoch
};

// One epoch loop: seeded shuffle, mini-batches of batch_size (final partial
// batch kept), forward -> cross entropy -> backward -> adam step at the
// scheduled lr. The model ends up holding the parameters of the epoch with
// the best validation accuracy (later epoch wins ties). A positive
// stop_below_train_loss ends the run early once the epoch's mean cross
// entropy drops under it (the epoch is still recorded).
TrainHistory train_fold(PhonationNet& model, const std::vector<const Segment*>& train,
                        const std::vector<const Segment*>& val, const TrainConfig& config,
                        AdamState* adam_out = nullptr, double stop_below_train_loss = 0.0);

ConfusionMatrix evaluate(const PhonationNet& model, const std::vector<const Segment*>& test,
                         int batch_size = 64);

// Clips grouped with their training windows; the unit of fold assignment.
struct TrainingClip {
  std::string id;
  PhonationMode mode = PhonationMode::Breathy;
  std::vector<Segment> segments;
};

struct PreparedData {
  std::vector<TrainingClip> train_clips;
  std::vector<Segment> test_segments;  // fixed external test set
  int bands = 128;
  int frames = 12;
};

struct MetricsReport {
  std::vector<double> fold_accuracy;
  std::vector<double> fold_f;
  double accuracy_mean = 0.0, accuracy_std = 0.0;  // population std over folds
  double f_mean = 0.0, f_std = 0.0;
};

struct FoldOutcome {
  int fold = 0;
  PhonationNet model;
  AdamState adam;
  TrainHistory history;
  ConfusionMatrix test_confusion;
  MetricsSummary test_metrics;
};

struct CrossValidationResult {
  MetricsReport report;
  std::vector<FoldOutcome> folds;
};

// Per fold: fresh seeded model, train on the other folds' segments, validate
// on the held-out fold's segments, evaluate on the external test set.
// parallel_folds > 1 runs that many fold contexts concurrently.
CrossValidationResult cross_validate(const PreparedData& data, const FoldSplit& folds,
                                     const NetworkConfig& net_config, const TrainConfig& config,
                                     int parallel_folds = 1);

// Population form: divide by n, not n-1.
std::pair<double, double> population_mean_std(const std::vector<double>& xs);

std::string format_confusion(const ConfusionMatrix& cm);
std::string format_report(const MetricsReport& report);

}  // namespace phonation
