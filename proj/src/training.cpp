#include "phonation/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <random>
#include <sstream>

#include "phonation/errors.hpp"
#include "phonation/ops.hpp"

namespace phonation {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Packs segments[first..first+count) into a [count,1,bands,frames] batch.
Tensor make_batch(const std::vector<const Segment*>& segments, std::size_t first,
                  std::size_t count, std::vector<int>* labels) {
  const Segment& head = *segments[first];
  Tensor batch({static_cast<int>(count), 1, head.n_bands, head.frames});
  auto& data = batch.data();
  const std::size_t plane = head.values.size();
  if (labels) labels->clear();
  for (std::size_t i = 0; i < count; ++i) {
    const Segment& seg = *segments[first + i];
    if (seg.values.size() != plane) throw ShapeError("segments in one batch must share a shape");
    std::copy(seg.values.begin(), seg.values.end(), data.begin() + static_cast<std::ptrdiff_t>(i * plane));
    if (labels) labels->push_back(static_cast<int>(seg.mode));
  }
  return batch;
}

double run_validation(const PhonationNet& model, const std::vector<const Segment*>& val,
                      int batch_size) {
  if (val.empty()) return 0.0;
  const ConfusionMatrix cm = evaluate(model, val, batch_size);
  return static_cast<double>(cm.trace()) / static_cast<double>(cm.total());
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
  if (base_lr <= 0.0) throw ConfigError("train: base lr must be positive");
  if (anneal_factor <= 0.0 || anneal_factor > 1.0) {
    throw ConfigError("train: anneal factor must be in (0, 1]");
  }
  if (anneal_period < 1) throw ConfigError("train: anneal period must be >= 1");
  if (weight_decay < 0.0) throw ConfigError("train: weight decay must be >= 0");
  if (epochs < 0) throw ConfigError("train: epoch count must be >= 0");
}

double lr_schedule(const TrainConfig& config, int epoch) {
  if (epoch < 0) throw ValueError("lr_schedule: epoch must be >= 0");
  return config.base_lr * std::pow(config.anneal_factor, epoch / config.anneal_period);
}

void ConfusionMatrix::add(PhonationMode truth, PhonationMode predicted) {
  counts[static_cast<std::size_t>(truth)][static_cast<std::size_t>(predicted)] += 1;
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t n = 0;
  for (const auto& row : counts) {
    for (std::int64_t c : row) n += c;
  }
  return n;
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t n = 0;
  for (int i = 0; i < kNumModes; ++i) n += counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
  return n;
}

MetricsSummary metrics_from_confusion(const ConfusionMatrix& cm, FAverage average) {
  const std::int64_t total = cm.total();
  if (total <= 0) throw ValueError("metrics_from_confusion: empty matrix");

  MetricsSummary m;
  m.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);

  double f_acc = 0.0;
  for (int c = 0; c < kNumModes; ++c) {
    std::int64_t row = 0, col = 0;
    for (int j = 0; j < kNumModes; ++j) {
      row += cm.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)];
      col += cm.counts[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)];
    }
    const std::int64_t hit = cm.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
    ClassMetrics& cls = m.per_class[static_cast<std::size_t>(c)];
    cls.precision = (col > 0) ? static_cast<double>(hit) / static_cast<double>(col) : 0.0;
    cls.recall = (row > 0) ? static_cast<double>(hit) / static_cast<double>(row) : 0.0;
    cls.f1 = (cls.precision + cls.recall > 0.0)
                 ? 2.0 * cls.precision * cls.recall / (cls.precision + cls.recall)
                 : 0.0;
    const double weight = (average == FAverage::Macro)
                              ? 1.0 / kNumModes
                              : static_cast<double>(row) / static_cast<double>(total);
    f_acc += weight * cls.f1;
  }
  m.f_measure = f_acc;
  return m;
}

TrainHistory train_fold(PhonationNet& model, const std::vector<const Segment*>& train,
                        const std::vector<const Segment*>& val, const TrainConfig& config,
                        AdamState* adam_out, double stop_below_train_loss) {
  config.validate();
  if (train.empty()) throw ValueError("train_fold: empty training set");

  AdamState adam;
  adam.weight_decay = config.weight_decay;
  auto params = model.parameters();

  TrainHistory history;
  std::mt19937_64 rng(mix_seed(config.seed, 0xf01d));
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<std::vector<double>> best_params;
  std::vector<const Segment*> shuffled(train.size());
  std::vector<int> labels;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
      std::swap(order[i], order[j]);
    }
    for (std::size_t i = 0; i < order.size(); ++i) shuffled[i] = train[order[i]];

    const double lr = lr_schedule(config, epoch);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < shuffled.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t count =
          std::min<std::size_t>(static_cast<std::size_t>(config.batch_size),
                                shuffled.size() - start);
      Tape tape;
      Tensor batch = make_batch(shuffled, start, count, &labels);
      Tensor logits = model.forward(tape, batch);
      Tensor loss = softmax_cross_entropy(tape, logits, labels);
      tape.backward(loss);
      adam_step(params, adam, lr);
      loss_sum += loss.item() * static_cast<double>(count);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr;
    stats.train_loss = loss_sum / static_cast<double>(shuffled.size());
    stats.val_accuracy = run_validation(model, val, config.batch_size);
    history.epochs.push_back(stats);

    if (!val.empty() && stats.val_accuracy >= history.best_val_accuracy) {
      history.best_val_accuracy = stats.val_accuracy;
      history.best_epoch = epoch;
      best_params = model.parameter_snapshot();
    }
    if (stop_below_train_loss > 0.0 && stats.train_loss < stop_below_train_loss) break;
  }

  if (!best_params.empty()) model.restore_parameters(best_params);
  if (adam_out) *adam_out = std::move(adam);
  std::ostringstream rng_state;
  rng_state << rng;
  history.final_rng_state = rng_state.str();
  return history;
}

ConfusionMatrix evaluate(const PhonationNet& model, const std::vector<const Segment*>& test,
                         int batch_size) {
  if (test.empty()) throw ValueError("evaluate: empty test set");
  if (batch_size < 1) throw ValueError("evaluate: batch size must be >= 1");

  ConfusionMatrix cm;
  for (std::size_t start = 0; start < test.size();
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t count =
        std::min<std::size_t>(static_cast<std::size_t>(batch_size), test.size() - start);
    Tape tape;
    Tensor batch = make_batch(test, start, count, nullptr);
    Tensor logits = model.forward(tape, batch);
    const int classes = logits.dim(1);
    for (std::size_t i = 0; i < count; ++i) {
      const double* row = logits.data().data() + static_cast<std::ptrdiff_t>(i) * classes;
      int best = 0;
      for (int c = 1; c < classes; ++c) {
        if (row[c] > row[best]) best = c;  // lowest index wins exact ties
      }
      cm.add(test[start + i]->mode, static_cast<PhonationMode>(best));
    }
  }
  return cm;
}

namespace {

FoldOutcome run_one_fold(const PreparedData& data, const FoldSplit& folds, int fold,
                         const NetworkConfig& net_config, const TrainConfig& config) {
  std::vector<const Segment*> train, val;
  for (const auto& clip : data.train_clips) {
    const auto it = folds.fold_of.find(clip.id);
    if (it == folds.fold_of.end()) {
      throw ValueError("cross_validate: clip '" + clip.id + "' missing from the fold split");
    }
    auto& bucket = (it->second == fold) ? val : train;
    for (const auto& seg : clip.segments) bucket.push_back(&seg);
  }
  std::vector<const Segment*> test;
  test.reserve(data.test_segments.size());
  for (const auto& seg : data.test_segments) test.push_back(&seg);

  NetworkConfig fold_net = net_config;
  fold_net.init_seed = mix_seed(net_config.init_seed, static_cast<std::uint64_t>(fold));
  TrainConfig fold_train = config;
  fold_train.seed = mix_seed(config.seed, 0x10000u + static_cast<std::uint64_t>(fold));

  FoldOutcome outcome{fold, PhonationNet(fold_net), AdamState{}, {}, {}, {}};
  outcome.history = train_fold(outcome.model, train, val, fold_train, &outcome.adam);
  outcome.test_confusion = evaluate(outcome.model, test, config.batch_size);
  outcome.test_metrics = metrics_from_confusion(outcome.test_confusion, config.f_average);
  return outcome;
}

}  // namespace

CrossValidationResult cross_validate(const PreparedData& data, const FoldSplit& folds,
                                     const NetworkConfig& net_config, const TrainConfig& config,
                                     int parallel_folds) {
  if (folds.n_folds < 2) throw ConfigError("cross_validate: need at least two folds");
  if (parallel_folds < 1) throw ConfigError("cross_validate: parallel fold count must be >= 1");

  CrossValidationResult result;
  result.folds.reserve(static_cast<std::size_t>(folds.n_folds));

  for (int first = 0; first < folds.n_folds; first += parallel_folds) {
    const int last = std::min(folds.n_folds, first + parallel_folds);
    std::vector<std::future<FoldOutcome>> running;
    for (int fold = first; fold < last; ++fold) {
      running.push_back(std::async(std::launch::async, run_one_fold, std::cref(data),
                                   std::cref(folds), fold, std::cref(net_config),
                                   std::cref(config)));
    }
    for (auto& f : running) result.folds.push_back(f.get());
  }

  auto& report = result.report;
  for (const auto& fold : result.folds) {
    report.fold_accuracy.push_back(fold.test_metrics.accuracy);
    report.fold_f.push_back(fold.test_metrics.f_measure);
  }
  std::tie(report.accuracy_mean, report.accuracy_std) =
      population_mean_std(report.fold_accuracy);
  std::tie(report.f_mean, report.f_std) = population_mean_std(report.fold_f);
  return result;
}

std::pair<double, double> population_mean_std(const std::vector<double>& xs) {
  if (xs.empty()) throw ValueError("population_mean_std: empty sample");
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / static_cast<double>(xs.size()))};
}

std::string format_confusion(const ConfusionMatrix& cm) {
  std::ostringstream os;
  os << "true\\pred";
  for (int c = 0; c < kNumModes; ++c) os << '\t' << mode_name(static_cast<PhonationMode>(c));
  os << '\n';
  for (int r = 0; r < kNumModes; ++r) {
    os << mode_name(static_cast<PhonationMode>(r));
    for (int c = 0; c < kNumModes; ++c) {
      os << '\t' << cm.counts[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    }
    os << '\n';
  }
  return os.str();
}

std::string format_report(const MetricsReport& report) {
  std::ostringstream os;
  char line[160];
  for (std::size_t i = 0; i < report.fold_accuracy.size(); ++i) {
    std::snprintf(line, sizeof line, "fold %2zu  accuracy %.4f  F %.4f\n", i,
                  report.fold_accuracy[i], report.fold_f[i]);
    os << line;
  }
  std::snprintf(line, sizeof line, "aggregate accuracy %.2f%% (%.4f) | F %.4f (%.4f)\n",
                100.0 * report.accuracy_mean, report.accuracy_std, report.f_mean, report.f_std);
  os << line;
  return os.str();
}

}  // namespace phonation
