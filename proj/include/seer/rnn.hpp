#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seer/dataset.hpp"
#include "seer/linalg.hpp"

namespace seer {

enum class CellKind : uint8_t { kLstm = 0, kGru = 1 };

const char* cell_kind_name(CellKind k);
CellKind cell_kind_from_name(const std::string& name);  // ConfigError

struct RnnConfig {
  CellKind cell = CellKind::kLstm;
  int input_dim = 3;    // 2 or 3 features
  int embed_dim = 32;
  int hidden_dim = 128;
  int num_classes = kNumTrainableClasses;
  int seq_len = 12;     // 6 or 12
  double learning_rate = 1e-3;
  double lr_decay = 1.0;  // step factor applied at 60% and 85% of the epochs
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip_norm = 5.0;
  int batch_size = 64;
  int epochs = 10;
  uint64_t seed = 1;
  // Training-time oversampling: sequences containing a label whose overall
  // timestep share is below the threshold are replicated boost times in the
  // epoch stream. Evaluation data is never resampled.
  int rare_label_boost = 1;
  double rare_label_threshold = 0.08;

  void validate_shapes() const;  // dimension checks only
  void validate() const;         // full training-config checks; throws ConfigError

  bool operator==(const RnnConfig&) const = default;
};

// Named view of one parameter group; model and gradient instances expose
// them in the same fixed order (also the serialization order).
struct ParamRef {
  const char* name;
  double* data;
  size_t size;
};

// Embedding + one recurrent cell + output projection. The LSTM uses gate
// biases (forget bias initialized to +1); the GRU gates carry no biases and
// its state is read directly by the output projection.
struct RnnModel {
  RnnConfig config;

  Mat w_embed;
  Vec b_embed;

  // LSTM gates: input, output, forget, candidate.
  Mat w_i, u_i;
  Vec b_i;
  Mat w_o, u_o;
  Vec b_o;
  Mat w_f, u_f;
  Vec b_f;
  Mat w_g, u_g;
  Vec b_g;

  // GRU gates: update, reset, candidate.
  Mat w_z, u_z;
  Mat w_r, u_r;
  Mat w_h, u_h;

  Mat w_out;
  Vec b_out;

  std::vector<ParamRef> parameters();
  std::vector<ParamRef> parameters() const;  // const-cast view for readers
  size_t parameter_count() const;

  bool operator==(const RnnModel&) const = default;
};

// Zero-valued model with the right shapes (no seeded init).
RnnModel make_zero_model(const RnnConfig& config);
// Seeded Glorot-uniform init, zero biases, LSTM forget bias +1.
RnnModel init_model(const RnnConfig& config);

// Recurrent state: h/c for the LSTM; the GRU keeps its state in h.
struct CellState {
  Vec h;
  Vec c;
};

CellState make_initial_state(const RnnConfig& config);

// relu(W x + b). Throws DataError on dimension mismatch.
Vec embed(const Vec& x, const RnnModel& model);

CellState lstm_step(const Vec& x_emb, const CellState& prev, const RnnModel& model);
CellState gru_step(const Vec& x_emb, const CellState& prev, const RnnModel& model);

// Per-step logits for one sequence, T x num_classes, initial state zero.
Mat forward(const std::vector<Vec>& features, const RnnModel& model);

// Mean over timesteps of -log softmax(logits_t)[label_t].
double sequence_loss(const Mat& logits, const std::vector<uint8_t>& labels);

Vec softmax(const Vec& logits);

// One training sequence: per-step features and labels.
struct TrainingSample {
  std::vector<Vec> features;  // seq_len x input_dim
  std::vector<uint8_t> labels;
};

// Converts cleaned records; truncates wider feature rows down to input_dim,
// throws DataError on narrower rows, label >= num_classes, or length
// mismatch with config.seq_len.
std::vector<TrainingSample> to_training_samples(const std::vector<SequenceRecord>& records,
                                                const RnnConfig& config);

// Full-batch loss and gradients via backpropagation through time. grads must
// be shaped like model (make_zero_model). The gradient of (loss_scale * mean
// per-step loss) is accumulated; returns the unscaled mean loss. When
// correct_steps is given, per-step argmax hits are counted into it.
double backward(const std::vector<TrainingSample>& batch, const RnnModel& model, RnnModel& grads,
                double loss_scale = 1.0, uint64_t* correct_steps = nullptr);

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;      // mean per-step loss
  double accuracy = 0.0;  // per-step argmax accuracy
};

struct TrainResult {
  RnnModel model;
  std::vector<EpochStats> log;
};

// Seeded, single-threaded, deterministic Adam training loop with global-norm
// gradient clipping. Throws DataError on an empty dataset and TrainingError
// if the loss diverges.
TrainResult train(const std::vector<SequenceRecord>& records, const RnnConfig& config);

// Per-step argmax predictions for a batch of sequences.
std::vector<std::vector<int>> predict_batch(const RnnModel& model,
                                            const std::vector<std::vector<Vec>>& batch);

constexpr char kModelMagic[9] = "SEERNET1";

// Versioned container: magic, JSON config blob, raw f64 little-endian
// parameter arrays in ParamRef order, trailing crc32.
void save_model(const RnnModel& model, const std::string& path);
RnnModel load_model(const std::string& path);  // FormatError on any corruption

}  // namespace seer
