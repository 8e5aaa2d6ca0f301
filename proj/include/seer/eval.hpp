#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "seer/dataset.hpp"
#include "seer/rnn.hpp"
#include "seer/sim.hpp"

namespace seer {

// Per-timestep (truth, prediction) counts; rows are truth, columns are
// predictions. Merging by summation is order independent.
struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<uint64_t> counts;  // row-major [truth * num_classes + pred]

  explicit ConfusionMatrix(int classes = kNumTrainableClasses)
      : num_classes(classes), counts(static_cast<size_t>(classes) * classes, 0) {}

  void add(int truth, int pred);  // DataError on out-of-range class
  uint64_t at(int truth, int pred) const {
    return counts[static_cast<size_t>(truth) * num_classes + pred];
  }
  uint64_t row_sum(int truth) const;
  uint64_t col_sum(int pred) const;
  uint64_t total() const;
  void merge(const ConfusionMatrix& other);
};

// Precision/recall with binomial statistical uncertainties. Metrics with a
// zero denominator are absent rather than zero.
struct ClassMetrics {
  int class_index = 0;
  uint64_t tp = 0, fp = 0, fn = 0;
  std::optional<double> precision, precision_err;
  std::optional<double> recall, recall_err;
};

// sqrt(p (1 - p) / n)
double binomial_error(double p, uint64_t n);

std::vector<ClassMetrics> metrics_from_confusion(const ConfusionMatrix& cm);

// Drops every sequence containing a car-follow frame (and, by default, stop
// frames); survivors carry only the trainable classes.
std::vector<SequenceRecord> clean(const std::vector<SequenceRecord>& records,
                                  bool drop_stop = true);

struct EvalResult {
  ConfusionMatrix confusion{kNumTrainableClasses};
  std::vector<ClassMetrics> metrics;
  double per_step_accuracy = 0.0;
  uint64_t timesteps = 0;
};

// Per-timestep argmax evaluation of a model over cleaned records.
EvalResult evaluate(const RnnModel& model, const std::vector<SequenceRecord>& records);

// The same metrics restricted to classes 0..2 (denominators from the full
// matrix), for the three-class reporting view.
std::vector<ClassMetrics> three_class_view(const EvalResult& result);

struct EvalBlock {
  std::string scene;
  CellKind cell = CellKind::kLstm;
  FeatureVariant variant = FeatureVariant::kA3;
  int seq_len = 12;
  EvalResult result;
  std::vector<EpochStats> train_log;
};

struct CvReport {
  std::vector<EvalBlock> blocks;
  std::string to_table() const;
  std::string to_json_string() const;
};

// Training settings used for the desk-scale grid runs.
RnnConfig desk_training_config();

struct CrossValidateConfig {
  SimConfig sim = desk_dataset_sim_config();
  std::string scene = "highway";
  int seq_len = 12;
  uint64_t train_sequences = 5000;
  uint64_t test_sequences = 1000;
  std::vector<CellKind> cells = {CellKind::kLstm, CellKind::kGru};
  std::vector<FeatureVariant> variants = {FeatureVariant::kA2, FeatureVariant::kA3};
  RnnConfig rnn = desk_training_config();  // cell/input_dim/seq_len set per grid point
  bool drop_stop = true;
  std::string work_dir = ".";
};

// Seed-disjoint train/test generation (seeds[0] -> train, seeds[1] -> test),
// then one trained and evaluated block per (cell, variant) grid point.
CvReport cross_validate(const CrossValidateConfig& cfg, const std::vector<uint64_t>& seeds);

}  // namespace seer
