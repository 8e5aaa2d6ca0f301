#include "seer/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "seer/errors.hpp"

namespace seer {

namespace {

using nlohmann::json;

std::string format_metric(const std::optional<double>& value, const std::optional<double>& err) {
  if (!value) return "      --      ";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%6.2f +- %4.2f", *value * 100.0, (err ? *err : 0.0) * 100.0);
  return buf;
}

json metrics_to_json(const std::vector<ClassMetrics>& metrics) {
  json arr = json::array();
  for (const auto& m : metrics) {
    json j;
    j["class"] = m.class_index;
    j["tp"] = m.tp;
    j["fp"] = m.fp;
    j["fn"] = m.fn;
    if (m.precision) {
      j["precision"] = *m.precision;
      j["precision_err"] = *m.precision_err;
    }
    if (m.recall) {
      j["recall"] = *m.recall;
      j["recall_err"] = *m.recall_err;
    }
    arr.push_back(j);
  }
  return arr;
}

}  // namespace

void ConfusionMatrix::add(int truth, int pred) {
  if (truth < 0 || truth >= num_classes || pred < 0 || pred >= num_classes) {
    throw DataError("confusion matrix class out of range: truth " + std::to_string(truth) +
                    ", pred " + std::to_string(pred));
  }
  ++counts[static_cast<size_t>(truth) * num_classes + pred];
}

uint64_t ConfusionMatrix::row_sum(int truth) const {
  uint64_t n = 0;
  for (int p = 0; p < num_classes; ++p) n += at(truth, p);
  return n;
}

uint64_t ConfusionMatrix::col_sum(int pred) const {
  uint64_t n = 0;
  for (int t = 0; t < num_classes; ++t) n += at(t, pred);
  return n;
}

uint64_t ConfusionMatrix::total() const {
  uint64_t n = 0;
  for (uint64_t c : counts) n += c;
  return n;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.num_classes != num_classes) throw DataError("confusion matrix size mismatch");
  for (size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
}

double binomial_error(double p, uint64_t n) {
  if (n == 0) throw DataError("binomial_error with n = 0");
  return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

std::vector<ClassMetrics> metrics_from_confusion(const ConfusionMatrix& cm) {
  std::vector<ClassMetrics> out;
  out.reserve(cm.num_classes);
  for (int c = 0; c < cm.num_classes; ++c) {
    ClassMetrics m;
    m.class_index = c;
    m.tp = cm.at(c, c);
    m.fp = cm.col_sum(c) - m.tp;
    m.fn = cm.row_sum(c) - m.tp;
    const uint64_t pred_n = m.tp + m.fp;
    const uint64_t truth_n = m.tp + m.fn;
    if (pred_n > 0) {
      m.precision = static_cast<double>(m.tp) / static_cast<double>(pred_n);
      m.precision_err = binomial_error(*m.precision, pred_n);
    }
    if (truth_n > 0) {
      m.recall = static_cast<double>(m.tp) / static_cast<double>(truth_n);
      m.recall_err = binomial_error(*m.recall, truth_n);
    }
    out.push_back(m);
  }
  return out;
}

std::vector<SequenceRecord> clean(const std::vector<SequenceRecord>& records, bool drop_stop) {
  std::vector<SequenceRecord> out;
  out.reserve(records.size());
  for (const auto& rec : records) {
    if (rec.contains_label(Intention::kCarFollow)) continue;
    if (drop_stop && rec.contains_label(Intention::kStop)) continue;
    out.push_back(rec);
  }
  return out;
}

EvalResult evaluate(const RnnModel& model, const std::vector<SequenceRecord>& records) {
  EvalResult result;
  result.confusion = ConfusionMatrix(model.config.num_classes);

  uint64_t correct = 0;
  std::vector<std::vector<Vec>> batch;
  std::vector<const SequenceRecord*> batch_recs;
  const size_t kChunk = 256;

  auto flush = [&] {
    if (batch.empty()) return;
    const auto preds = predict_batch(model, batch);
    for (size_t i = 0; i < preds.size(); ++i) {
      const auto& rec = *batch_recs[i];
      for (size_t t = 0; t < rec.frames.size(); ++t) {
        const int truth = rec.frames[t].label;
        result.confusion.add(truth, preds[i][t]);
        if (truth == preds[i][t]) ++correct;
        ++result.timesteps;
      }
    }
    batch.clear();
    batch_recs.clear();
  };

  for (const auto& rec : records) {
    if (static_cast<int>(rec.frames.size()) != model.config.seq_len) {
      throw DataError("record length does not match model seq_len");
    }
    if (rec.feature_dim < model.config.input_dim) {
      throw DataError("record feature_dim narrower than model input_dim");
    }
    std::vector<Vec> features;
    features.reserve(rec.frames.size());
    for (const auto& f : rec.frames) {
      Vec x(model.config.input_dim);
      for (int k = 0; k < model.config.input_dim; ++k) x[k] = f.features[k];
      features.push_back(std::move(x));
    }
    batch.push_back(std::move(features));
    batch_recs.push_back(&rec);
    if (batch.size() >= kChunk) flush();
  }
  flush();

  result.metrics = metrics_from_confusion(result.confusion);
  result.per_step_accuracy =
      result.timesteps > 0 ? static_cast<double>(correct) / static_cast<double>(result.timesteps)
                           : 0.0;
  return result;
}

std::vector<ClassMetrics> three_class_view(const EvalResult& result) {
  std::vector<ClassMetrics> out;
  for (const auto& m : result.metrics) {
    if (m.class_index <= 2) out.push_back(m);
  }
  return out;
}

std::string CvReport::to_table() const {
  std::ostringstream os;
  for (const auto& b : blocks) {
    os << "== scene " << b.scene << " | " << cell_kind_name(b.cell) << " | features "
       << feature_variant_name(b.variant) << " | T " << b.seq_len << " ==\n";
    os << "class  precision [%]    recall [%]       (per-step accuracy "
       << b.result.per_step_accuracy * 100.0 << "%)\n";
    for (const auto& m : b.result.metrics) {
      os << "  " << m.class_index << "    " << format_metric(m.precision, m.precision_err)
         << "  " << format_metric(m.recall, m.recall_err) << "\n";
    }
  }
  return os.str();
}

std::string CvReport::to_json_string() const {
  json arr = json::array();
  for (const auto& b : blocks) {
    json j;
    j["scene"] = b.scene;
    j["cell"] = cell_kind_name(b.cell);
    j["variant"] = feature_variant_name(b.variant);
    j["seq_len"] = b.seq_len;
    j["per_step_accuracy"] = b.result.per_step_accuracy;
    j["timesteps"] = b.result.timesteps;
    j["metrics"] = metrics_to_json(b.result.metrics);
    j["metrics_3class"] = metrics_to_json(three_class_view(b.result));
    json log = json::array();
    for (const auto& e : b.train_log) {
      log.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"accuracy", e.accuracy}});
    }
    j["train_log"] = log;
    arr.push_back(j);
  }
  return json{{"blocks", arr}}.dump(2);
}

RnnConfig desk_training_config() {
  RnnConfig rc;
  rc.learning_rate = 3e-3;
  rc.lr_decay = 0.3;
  rc.epochs = 42;
  rc.rare_label_boost = 8;
  rc.rare_label_threshold = 0.055;
  return rc;
}

CvReport cross_validate(const CrossValidateConfig& cfg, const std::vector<uint64_t>& seeds) {
  if (seeds.size() < 2) throw ConfigError("cross_validate needs at least 2 seeds");

  auto generate = [&cfg](uint64_t seed, uint64_t count, const std::string& tag) {
    GenerateConfig g;
    g.sim = cfg.sim;
    g.sim.seed = seed;
    g.variant = FeatureVariant::kA3;  // superset; narrower models truncate
    g.seq_len = cfg.seq_len;
    g.num_sequences = count;
    g.scene = cfg.scene;
    g.split = tag;
    const std::string path = cfg.work_dir + "/cv_" + tag + "_" + std::to_string(seed) + ".seerseq";
    generate_dataset(g, path);
    return read_dataset(path).records;
  };

  const auto train_records = clean(generate(seeds[0], cfg.train_sequences, "train"), cfg.drop_stop);
  const auto test_records = clean(generate(seeds[1], cfg.test_sequences, "test"), cfg.drop_stop);
  if (train_records.empty() || test_records.empty()) {
    throw DataError("cross_validate: cleaning removed all sequences");
  }

  CvReport report;
  for (const CellKind cell : cfg.cells) {
    for (const FeatureVariant variant : cfg.variants) {
      RnnConfig rc = cfg.rnn;
      rc.cell = cell;
      rc.input_dim = feature_dim(variant);
      rc.seq_len = cfg.seq_len;
      TrainResult tr = train(train_records, rc);

      EvalBlock block;
      block.scene = cfg.scene;
      block.cell = cell;
      block.variant = variant;
      block.seq_len = cfg.seq_len;
      block.result = evaluate(tr.model, test_records);
      block.train_log = tr.log;
      report.blocks.push_back(std::move(block));
    }
  }
  return report;
}

}  // namespace seer
