#include "seer/rnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "seer/bytes.hpp"
#include "seer/crc32.hpp"
#include "seer/errors.hpp"
#include "seer/rng.hpp"

namespace seer {

namespace {

using nlohmann::json;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void relu_inplace(Vec& v) {
  for (auto& x : v) x = x > 0.0 ? x : 0.0;
}

void sigmoid_inplace(Vec& v) {
  for (auto& x : v) x = sigmoid(x);
}

void tanh_inplace(Vec& v) {
  for (auto& x : v) x = std::tanh(x);
}

// out = W x + U h (+ b)
void affine(const Mat& w, const Vec& x, const Mat& u, const Vec& h, const Vec* b, Vec& out) {
  matvec(w, x, out);
  matvec_add(u, h, out);
  if (b) vec_add(*b, out);
}

void glorot_fill(Mat& m, Rng& rng) {
  const double limit = std::sqrt(6.0 / (m.rows + m.cols));
  for (auto& v : m.a) v = rng.uniform(-limit, limit);
}

struct StepCache {
  Vec x, e_pre, e;
  Vec gi, go, gf, gg, c, tc, h;  // LSTM activations and states
  Vec z, r, sr, hb;              // GRU activations (state lives in h)
  Vec logits, probs;
};

void forward_sequence(const std::vector<Vec>& features, const RnnModel& m,
                      std::vector<StepCache>& steps) {
  const auto& cfg = m.config;
  const int T = static_cast<int>(features.size());
  if (static_cast<int>(steps.size()) < T) steps.resize(T);

  Vec h_prev(cfg.hidden_dim, 0.0);
  Vec c_prev(cfg.hidden_dim, 0.0);

  for (int t = 0; t < T; ++t) {
    StepCache& sc = steps[t];
    if (static_cast<int>(features[t].size()) != cfg.input_dim) {
      throw DataError("feature dimension " + std::to_string(features[t].size()) +
                      " does not match model input_dim " + std::to_string(cfg.input_dim));
    }
    sc.x = features[t];
    matvec(m.w_embed, sc.x, sc.e_pre);
    vec_add(m.b_embed, sc.e_pre);
    sc.e = sc.e_pre;
    relu_inplace(sc.e);

    if (cfg.cell == CellKind::kLstm) {
      affine(m.w_i, sc.e, m.u_i, h_prev, &m.b_i, sc.gi);
      sigmoid_inplace(sc.gi);
      affine(m.w_o, sc.e, m.u_o, h_prev, &m.b_o, sc.go);
      sigmoid_inplace(sc.go);
      affine(m.w_f, sc.e, m.u_f, h_prev, &m.b_f, sc.gf);
      sigmoid_inplace(sc.gf);
      affine(m.w_g, sc.e, m.u_g, h_prev, &m.b_g, sc.gg);
      tanh_inplace(sc.gg);
      sc.c.assign(cfg.hidden_dim, 0.0);
      for (int k = 0; k < cfg.hidden_dim; ++k) {
        sc.c[k] = sc.gi[k] * sc.gg[k] + sc.gf[k] * c_prev[k];
      }
      sc.tc = sc.c;
      tanh_inplace(sc.tc);
      sc.h.assign(cfg.hidden_dim, 0.0);
      for (int k = 0; k < cfg.hidden_dim; ++k) sc.h[k] = sc.go[k] * sc.tc[k];
      c_prev = sc.c;
    } else {
      affine(m.w_z, sc.e, m.u_z, h_prev, nullptr, sc.z);
      sigmoid_inplace(sc.z);
      affine(m.w_r, sc.e, m.u_r, h_prev, nullptr, sc.r);
      sigmoid_inplace(sc.r);
      sc.sr.assign(cfg.hidden_dim, 0.0);
      for (int k = 0; k < cfg.hidden_dim; ++k) sc.sr[k] = h_prev[k] * sc.r[k];
      affine(m.w_h, sc.e, m.u_h, sc.sr, nullptr, sc.hb);
      tanh_inplace(sc.hb);
      sc.h.assign(cfg.hidden_dim, 0.0);
      for (int k = 0; k < cfg.hidden_dim; ++k) {
        sc.h[k] = (1.0 - sc.z[k]) * sc.hb[k] + sc.z[k] * h_prev[k];
      }
    }

    matvec(m.w_out, sc.h, sc.logits);
    vec_add(m.b_out, sc.logits);
    sc.probs = softmax(sc.logits);
    h_prev = sc.h;
  }
}

json config_to_json(const RnnConfig& c) {
  json j;
  j["version"] = 1;
  j["cell"] = cell_kind_name(c.cell);
  j["input_dim"] = c.input_dim;
  j["embed_dim"] = c.embed_dim;
  j["hidden_dim"] = c.hidden_dim;
  j["num_classes"] = c.num_classes;
  j["seq_len"] = c.seq_len;
  j["learning_rate"] = c.learning_rate;
  j["adam_beta1"] = c.adam_beta1;
  j["adam_beta2"] = c.adam_beta2;
  j["adam_eps"] = c.adam_eps;
  j["grad_clip_norm"] = c.grad_clip_norm;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  return j;
}

RnnConfig config_from_json(const json& j) {
  try {
    if (j.at("version").get<int>() != 1) {
      throw FormatError("unsupported model version " + std::to_string(j.at("version").get<int>()));
    }
    RnnConfig c;
    c.cell = cell_kind_from_name(j.at("cell").get<std::string>());
    c.input_dim = j.at("input_dim").get<int>();
    c.embed_dim = j.at("embed_dim").get<int>();
    c.hidden_dim = j.at("hidden_dim").get<int>();
    c.num_classes = j.at("num_classes").get<int>();
    c.seq_len = j.at("seq_len").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.adam_beta1 = j.at("adam_beta1").get<double>();
    c.adam_beta2 = j.at("adam_beta2").get<double>();
    c.adam_eps = j.at("adam_eps").get<double>();
    c.grad_clip_norm = j.at("grad_clip_norm").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.epochs = j.at("epochs").get<int>();
    c.seed = j.at("seed").get<uint64_t>();
    return c;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad model config: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("bad model config: ") + e.what());
  }
}

}  // namespace

const char* cell_kind_name(CellKind k) { return k == CellKind::kLstm ? "lstm" : "gru"; }

CellKind cell_kind_from_name(const std::string& name) {
  if (name == "lstm" || name == "LSTM") return CellKind::kLstm;
  if (name == "gru" || name == "GRU") return CellKind::kGru;
  throw ConfigError("unknown cell kind '" + name + "' (expected lstm or gru)");
}

void RnnConfig::validate_shapes() const {
  if (input_dim < 1 || embed_dim < 1 || hidden_dim < 1 || num_classes < 2 || seq_len < 1) {
    throw ConfigError("model dimensions must be >= 1 (and num_classes >= 2)");
  }
}

void RnnConfig::validate() const {
  validate_shapes();
  if (seq_len != 6 && seq_len != 12) {
    throw ConfigError("seq_len must be 6 or 12, got " + std::to_string(seq_len));
  }
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(grad_clip_norm > 0.0)) throw ConfigError("grad_clip_norm must be positive");
}

std::vector<ParamRef> RnnModel::parameters() {
  std::vector<ParamRef> out;
  auto add_mat = [&out](const char* name, Mat& m) {
    if (!m.a.empty()) out.push_back({name, m.a.data(), m.a.size()});
  };
  auto add_vec = [&out](const char* name, Vec& v) {
    if (!v.empty()) out.push_back({name, v.data(), v.size()});
  };
  add_mat("w_embed", w_embed);
  add_vec("b_embed", b_embed);
  if (config.cell == CellKind::kLstm) {
    add_mat("w_i", w_i);
    add_mat("u_i", u_i);
    add_vec("b_i", b_i);
    add_mat("w_o", w_o);
    add_mat("u_o", u_o);
    add_vec("b_o", b_o);
    add_mat("w_f", w_f);
    add_mat("u_f", u_f);
    add_vec("b_f", b_f);
    add_mat("w_g", w_g);
    add_mat("u_g", u_g);
    add_vec("b_g", b_g);
  } else {
    add_mat("w_z", w_z);
    add_mat("u_z", u_z);
    add_mat("w_r", w_r);
    add_mat("u_r", u_r);
    add_mat("w_h", w_h);
    add_mat("u_h", u_h);
  }
  add_mat("w_out", w_out);
  add_vec("b_out", b_out);
  return out;
}

std::vector<ParamRef> RnnModel::parameters() const {
  return const_cast<RnnModel*>(this)->parameters();
}

size_t RnnModel::parameter_count() const {
  size_t n = 0;
  for (const auto& p : parameters()) n += p.size;
  return n;
}

RnnModel make_zero_model(const RnnConfig& config) {
  config.validate_shapes();
  RnnModel m;
  m.config = config;
  const int E = config.embed_dim;
  const int H = config.hidden_dim;
  const int I = config.input_dim;
  const int C = config.num_classes;
  m.w_embed = Mat(E, I);
  m.b_embed.assign(E, 0.0);
  if (config.cell == CellKind::kLstm) {
    for (Mat* w : {&m.w_i, &m.w_o, &m.w_f, &m.w_g}) *w = Mat(H, E);
    for (Mat* u : {&m.u_i, &m.u_o, &m.u_f, &m.u_g}) *u = Mat(H, H);
    for (Vec* b : {&m.b_i, &m.b_o, &m.b_f, &m.b_g}) b->assign(H, 0.0);
  } else {
    for (Mat* w : {&m.w_z, &m.w_r, &m.w_h}) *w = Mat(H, E);
    for (Mat* u : {&m.u_z, &m.u_r, &m.u_h}) *u = Mat(H, H);
  }
  m.w_out = Mat(C, H);
  m.b_out.assign(C, 0.0);
  return m;
}

RnnModel init_model(const RnnConfig& config) {
  RnnModel m = make_zero_model(config);
  Rng rng(mix_seed(config.seed, 0xC0DE));
  glorot_fill(m.w_embed, rng);
  if (config.cell == CellKind::kLstm) {
    for (Mat* w : {&m.w_i, &m.u_i, &m.w_o, &m.u_o, &m.w_f, &m.u_f, &m.w_g, &m.u_g}) {
      glorot_fill(*w, rng);
    }
    std::fill(m.b_f.begin(), m.b_f.end(), 1.0);  // stabilizes early recurrence
  } else {
    for (Mat* w : {&m.w_z, &m.u_z, &m.w_r, &m.u_r, &m.w_h, &m.u_h}) glorot_fill(*w, rng);
  }
  glorot_fill(m.w_out, rng);
  return m;
}

CellState make_initial_state(const RnnConfig& config) {
  CellState s;
  s.h.assign(config.hidden_dim, 0.0);
  if (config.cell == CellKind::kLstm) s.c.assign(config.hidden_dim, 0.0);
  return s;
}

Vec embed(const Vec& x, const RnnModel& model) {
  if (static_cast<int>(x.size()) != model.config.input_dim) {
    throw DataError("embed input dim " + std::to_string(x.size()) + " does not match model " +
                    std::to_string(model.config.input_dim));
  }
  Vec out;
  matvec(model.w_embed, x, out);
  vec_add(model.b_embed, out);
  relu_inplace(out);
  return out;
}

CellState lstm_step(const Vec& x_emb, const CellState& prev, const RnnModel& m) {
  const int H = m.config.hidden_dim;
  if (static_cast<int>(x_emb.size()) != m.config.embed_dim ||
      static_cast<int>(prev.h.size()) != H || static_cast<int>(prev.c.size()) != H) {
    throw DataError("lstm_step shape mismatch");
  }
  Vec i, o, f, g;
  affine(m.w_i, x_emb, m.u_i, prev.h, &m.b_i, i);
  sigmoid_inplace(i);
  affine(m.w_o, x_emb, m.u_o, prev.h, &m.b_o, o);
  sigmoid_inplace(o);
  affine(m.w_f, x_emb, m.u_f, prev.h, &m.b_f, f);
  sigmoid_inplace(f);
  affine(m.w_g, x_emb, m.u_g, prev.h, &m.b_g, g);
  tanh_inplace(g);

  CellState next;
  next.c.assign(H, 0.0);
  next.h.assign(H, 0.0);
  for (int k = 0; k < H; ++k) {
    next.c[k] = i[k] * g[k] + f[k] * prev.c[k];
    next.h[k] = o[k] * std::tanh(next.c[k]);
  }
  return next;
}

CellState gru_step(const Vec& x_emb, const CellState& prev, const RnnModel& m) {
  const int H = m.config.hidden_dim;
  if (static_cast<int>(x_emb.size()) != m.config.embed_dim ||
      static_cast<int>(prev.h.size()) != H) {
    throw DataError("gru_step shape mismatch");
  }
  Vec z, r, sr(H, 0.0), hb;
  affine(m.w_z, x_emb, m.u_z, prev.h, nullptr, z);
  sigmoid_inplace(z);
  affine(m.w_r, x_emb, m.u_r, prev.h, nullptr, r);
  sigmoid_inplace(r);
  for (int k = 0; k < H; ++k) sr[k] = prev.h[k] * r[k];
  affine(m.w_h, x_emb, m.u_h, sr, nullptr, hb);
  tanh_inplace(hb);

  CellState next;
  next.h.assign(H, 0.0);
  for (int k = 0; k < H; ++k) next.h[k] = (1.0 - z[k]) * hb[k] + z[k] * prev.h[k];
  return next;
}

Vec softmax(const Vec& logits) {
  Vec p(logits.size());
  double mx = -std::numeric_limits<double>::max();
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - mx);
    sum += p[k];
  }
  for (auto& v : p) v /= sum;
  return p;
}

Mat forward(const std::vector<Vec>& features, const RnnModel& model) {
  if (static_cast<int>(features.size()) != model.config.seq_len) {
    throw DataError("sequence length " + std::to_string(features.size()) +
                    " does not match model seq_len " + std::to_string(model.config.seq_len));
  }
  std::vector<StepCache> steps;
  forward_sequence(features, model, steps);
  Mat logits(model.config.seq_len, model.config.num_classes);
  for (int t = 0; t < model.config.seq_len; ++t) {
    for (int k = 0; k < model.config.num_classes; ++k) logits(t, k) = steps[t].logits[k];
  }
  return logits;
}

double sequence_loss(const Mat& logits, const std::vector<uint8_t>& labels) {
  if (static_cast<size_t>(logits.rows) != labels.size()) {
    throw DataError("labels/logits length mismatch");
  }
  double total = 0.0;
  for (int t = 0; t < logits.rows; ++t) {
    if (labels[t] >= logits.cols) {
      throw DataError("label " + std::to_string(labels[t]) + " out of range at step " +
                      std::to_string(t));
    }
    Vec row(logits.cols);
    for (int k = 0; k < logits.cols; ++k) row[k] = logits(t, k);
    const Vec p = softmax(row);
    total += -std::log(std::max(p[labels[t]], 1e-300));
  }
  return total / logits.rows;
}

std::vector<TrainingSample> to_training_samples(const std::vector<SequenceRecord>& records,
                                                const RnnConfig& config) {
  std::vector<TrainingSample> out;
  out.reserve(records.size());
  for (const auto& rec : records) {
    if (static_cast<int>(rec.frames.size()) != config.seq_len) {
      throw DataError("record length " + std::to_string(rec.frames.size()) +
                      " does not match seq_len " + std::to_string(config.seq_len));
    }
    if (rec.feature_dim < config.input_dim) {
      throw DataError("record feature_dim " + std::to_string(rec.feature_dim) +
                      " narrower than model input_dim " + std::to_string(config.input_dim));
    }
    TrainingSample s;
    s.features.reserve(rec.frames.size());
    s.labels.reserve(rec.frames.size());
    for (const auto& f : rec.frames) {
      if (f.label >= config.num_classes) {
        throw DataError("raw label " + std::to_string(f.label) +
                        " present in training data; run cleaning first");
      }
      Vec x(config.input_dim);
      for (int k = 0; k < config.input_dim; ++k) x[k] = static_cast<double>(f.features[k]);
      s.features.push_back(std::move(x));
      s.labels.push_back(f.label);
    }
    out.push_back(std::move(s));
  }
  return out;
}

double backward(const std::vector<TrainingSample>& batch, const RnnModel& m, RnnModel& grads,
                double loss_scale, uint64_t* correct_steps) {
  if (batch.empty()) throw DataError("backward on empty batch");
  const auto& cfg = m.config;
  const int T = cfg.seq_len;
  const int H = cfg.hidden_dim;
  const double scale = loss_scale / (static_cast<double>(batch.size()) * T);

  double total_loss = 0.0;
  std::vector<StepCache> steps;
  Vec dy(cfg.num_classes), dh(H), dcarry_h(H), dcarry_c(H), dgate(H), de(cfg.embed_dim);
  Vec dzi(H), dzo(H), dzf(H), dzg(H), dz(H), dr(H), dsr(H), dze(cfg.embed_dim);

  for (const auto& sample : batch) {
    if (static_cast<int>(sample.features.size()) != T ||
        static_cast<int>(sample.labels.size()) != T) {
      throw DataError("sample length does not match config seq_len");
    }
    forward_sequence(sample.features, m, steps);

    for (int t = 0; t < T; ++t) {
      const uint8_t label = sample.labels[t];
      if (label >= cfg.num_classes) {
        throw DataError("label " + std::to_string(label) + " out of range");
      }
      total_loss += -std::log(std::max(steps[t].probs[label], 1e-300));
      if (correct_steps) {
        const auto& p = steps[t].probs;
        const int pred = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
        if (pred == label) ++*correct_steps;
      }
    }

    std::fill(dcarry_h.begin(), dcarry_h.end(), 0.0);
    std::fill(dcarry_c.begin(), dcarry_c.end(), 0.0);

    for (int t = T - 1; t >= 0; --t) {
      const StepCache& sc = steps[t];
      const Vec* h_prev = t > 0 ? &steps[t - 1].h : nullptr;
      const Vec* c_prev = t > 0 ? &steps[t - 1].c : nullptr;

      // dL/dlogits = (softmax - onehot) * scale
      for (int k = 0; k < cfg.num_classes; ++k) dy[k] = sc.probs[k] * scale;
      dy[sample.labels[t]] -= scale;

      outer_add(dy, sc.h, grads.w_out);
      vec_add(dy, grads.b_out);

      dh = dcarry_h;
      matvec_transpose_add(m.w_out, dy, dh);

      std::fill(de.begin(), de.end(), 0.0);

      if (cfg.cell == CellKind::kLstm) {
        // dc gets the new output-path term plus the carry from t+1
        for (int k = 0; k < H; ++k) {
          const double dtc = dh[k] * sc.go[k];
          dcarry_c[k] += dtc * (1.0 - sc.tc[k] * sc.tc[k]);
        }
        for (int k = 0; k < H; ++k) {
          const double dc = dcarry_c[k];
          const double di = dc * sc.gg[k];
          const double dg = dc * sc.gi[k];
          const double df = dc * (c_prev ? (*c_prev)[k] : 0.0);
          const double doo = dh[k] * sc.tc[k];
          dzi[k] = di * sc.gi[k] * (1.0 - sc.gi[k]);
          dzo[k] = doo * sc.go[k] * (1.0 - sc.go[k]);
          dzf[k] = df * sc.gf[k] * (1.0 - sc.gf[k]);
          dzg[k] = dg * (1.0 - sc.gg[k] * sc.gg[k]);
          dcarry_c[k] = dc * sc.gf[k];  // flows to c_{t-1}
        }
        std::fill(dcarry_h.begin(), dcarry_h.end(), 0.0);
        outer_add(dzi, sc.e, grads.w_i);
        outer_add(dzo, sc.e, grads.w_o);
        outer_add(dzf, sc.e, grads.w_f);
        outer_add(dzg, sc.e, grads.w_g);
        vec_add(dzi, grads.b_i);
        vec_add(dzo, grads.b_o);
        vec_add(dzf, grads.b_f);
        vec_add(dzg, grads.b_g);
        if (h_prev) {
          outer_add(dzi, *h_prev, grads.u_i);
          outer_add(dzo, *h_prev, grads.u_o);
          outer_add(dzf, *h_prev, grads.u_f);
          outer_add(dzg, *h_prev, grads.u_g);
          matvec_transpose_add(m.u_i, dzi, dcarry_h);
          matvec_transpose_add(m.u_o, dzo, dcarry_h);
          matvec_transpose_add(m.u_f, dzf, dcarry_h);
          matvec_transpose_add(m.u_g, dzg, dcarry_h);
        }
        matvec_transpose_add(m.w_i, dzi, de);
        matvec_transpose_add(m.w_o, dzo, de);
        matvec_transpose_add(m.w_f, dzf, de);
        matvec_transpose_add(m.w_g, dzg, de);
      } else {
        // ds = dh; state s_t = (1 - z) hb + z s_{t-1}
        std::fill(dcarry_h.begin(), dcarry_h.end(), 0.0);
        for (int k = 0; k < H; ++k) {
          const double ds = dh[k];
          const double sp = h_prev ? (*h_prev)[k] : 0.0;
          dz[k] = ds * (sp - sc.hb[k]) * sc.z[k] * (1.0 - sc.z[k]);
          dgate[k] = ds * (1.0 - sc.z[k]) * (1.0 - sc.hb[k] * sc.hb[k]);  // d(pre-tanh hb)
          dcarry_h[k] += ds * sc.z[k];
        }
        outer_add(dgate, sc.e, grads.w_h);
        outer_add(dgate, sc.sr, grads.u_h);
        std::fill(dsr.begin(), dsr.end(), 0.0);
        matvec_transpose_add(m.u_h, dgate, dsr);
        for (int k = 0; k < H; ++k) {
          const double sp = h_prev ? (*h_prev)[k] : 0.0;
          dcarry_h[k] += dsr[k] * sc.r[k];
          dr[k] = dsr[k] * sp * sc.r[k] * (1.0 - sc.r[k]);
        }
        outer_add(dz, sc.e, grads.w_z);
        outer_add(dr, sc.e, grads.w_r);
        if (h_prev) {
          outer_add(dz, *h_prev, grads.u_z);
          outer_add(dr, *h_prev, grads.u_r);
          matvec_transpose_add(m.u_z, dz, dcarry_h);
          matvec_transpose_add(m.u_r, dr, dcarry_h);
        }
        matvec_transpose_add(m.w_z, dz, de);
        matvec_transpose_add(m.w_r, dr, de);
        matvec_transpose_add(m.w_h, dgate, de);
      }

      // Embedding: relu gate on the pre-activation.
      for (int k = 0; k < cfg.embed_dim; ++k) dze[k] = sc.e_pre[k] > 0.0 ? de[k] : 0.0;
      outer_add(dze, sc.x, grads.w_embed);
      vec_add(dze, grads.b_embed);
    }
  }
  return total_loss / (static_cast<double>(batch.size()) * T);
}

std::vector<std::vector<int>> predict_batch(const RnnModel& model,
                                            const std::vector<std::vector<Vec>>& batch) {
  std::vector<std::vector<int>> out;
  out.reserve(batch.size());
  std::vector<StepCache> steps;
  for (const auto& features : batch) {
    if (static_cast<int>(features.size()) != model.config.seq_len) {
      throw DataError("window length does not match model seq_len");
    }
    forward_sequence(features, model, steps);
    std::vector<int> preds(features.size());
    for (size_t t = 0; t < features.size(); ++t) {
      const auto& p = steps[t].probs;
      preds[t] = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    }
    out.push_back(std::move(preds));
  }
  return out;
}

TrainResult train(const std::vector<SequenceRecord>& records, const RnnConfig& config) {
  config.validate();
  if (records.empty()) throw DataError("training dataset is empty");
  const std::vector<TrainingSample> samples = to_training_samples(records, config);

  RnnModel model = init_model(config);
  RnnModel grads = make_zero_model(config);
  RnnModel adam_m = make_zero_model(config);
  RnnModel adam_v = make_zero_model(config);
  auto model_params = model.parameters();
  auto grad_params = grads.parameters();
  auto m_params = adam_m.parameters();
  auto v_params = adam_v.parameters();
  int adam_t = 0;

  TrainResult result;

  // Epoch stream with optional replication of rare-label sequences.
  std::vector<size_t> base_index;
  if (config.rare_label_boost > 1) {
    std::array<uint64_t, 16> label_steps{};
    uint64_t total_steps = 0;
    for (const auto& s : samples) {
      for (uint8_t l : s.labels) {
        ++label_steps[l];
        ++total_steps;
      }
    }
    for (size_t i = 0; i < samples.size(); ++i) {
      bool rare = false;
      for (uint8_t l : samples[i].labels) {
        if (static_cast<double>(label_steps[l]) <
            config.rare_label_threshold * static_cast<double>(total_steps)) {
          rare = true;
          break;
        }
      }
      const int copies = rare ? config.rare_label_boost : 1;
      for (int c = 0; c < copies; ++c) base_index.push_back(i);
    }
  } else {
    base_index.resize(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) base_index[i] = i;
  }
  const size_t n = base_index.size();

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    double lr = config.learning_rate;
    if (epoch > static_cast<int>(0.6 * config.epochs)) lr *= config.lr_decay;
    if (epoch > static_cast<int>(0.85 * config.epochs)) lr *= config.lr_decay;

    std::vector<size_t> order = base_index;
    Rng rng(mix_seed(config.seed, 9000 + static_cast<uint64_t>(epoch)));
    for (size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(i)]);

    double epoch_loss = 0.0;
    uint64_t correct = 0;
    size_t seen = 0;

    for (size_t begin = 0; begin < n; begin += config.batch_size) {
      const size_t end = std::min(begin + config.batch_size, n);
      std::vector<TrainingSample> batch;
      batch.reserve(end - begin);
      for (size_t i = begin; i < end; ++i) batch.push_back(samples[order[i]]);

      for (auto& g : grad_params) std::fill(g.data, g.data + g.size, 0.0);
      const double batch_loss = backward(batch, model, grads, 1.0, &correct);
      if (!std::isfinite(batch_loss)) {
        throw TrainingError("loss diverged (non-finite) at epoch " + std::to_string(epoch));
      }
      epoch_loss += batch_loss * static_cast<double>(batch.size());
      seen += batch.size();

      double norm2 = 0.0;
      for (const auto& g : grad_params) {
        for (size_t k = 0; k < g.size; ++k) norm2 += g.data[k] * g.data[k];
      }
      const double norm = std::sqrt(norm2);
      if (norm > config.grad_clip_norm) {
        const double s = config.grad_clip_norm / norm;
        for (auto& g : grad_params) {
          for (size_t k = 0; k < g.size; ++k) g.data[k] *= s;
        }
      }

      ++adam_t;
      const double bc1 = 1.0 - std::pow(config.adam_beta1, adam_t);
      const double bc2 = 1.0 - std::pow(config.adam_beta2, adam_t);
      for (size_t p = 0; p < model_params.size(); ++p) {
        double* w = model_params[p].data;
        const double* g = grad_params[p].data;
        double* mm = m_params[p].data;
        double* vv = v_params[p].data;
        for (size_t k = 0; k < model_params[p].size; ++k) {
          mm[k] = config.adam_beta1 * mm[k] + (1.0 - config.adam_beta1) * g[k];
          vv[k] = config.adam_beta2 * vv[k] + (1.0 - config.adam_beta2) * g[k] * g[k];
          w[k] -= lr * (mm[k] / bc1) / (std::sqrt(vv[k] / bc2) + config.adam_eps);
        }
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.loss = epoch_loss / static_cast<double>(seen);
    stats.accuracy =
        static_cast<double>(correct) / (static_cast<double>(seen) * config.seq_len);
    result.log.push_back(stats);
  }

  result.model = std::move(model);
  return result;
}

void save_model(const RnnModel& model, const std::string& path) {
  std::string body;
  const std::string cfg = config_to_json(model.config).dump();
  put_u32(body, static_cast<uint32_t>(cfg.size()));
  body += cfg;
  for (const auto& p : model.parameters()) {
    put_u64(body, p.size);
    for (size_t k = 0; k < p.size; ++k) put_f64(body, p.data[k]);
  }
  const uint32_t crc = crc32(body.data(), body.size());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out.write(kModelMagic, 8);
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  std::string tail;
  put_u32(tail, crc);
  out.write(tail.data(), 4);
  out.close();
  if (!out.good()) throw FormatError("write failed on '" + path + "'");
}

RnnModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < 12 || std::memcmp(data.data(), kModelMagic, 8) != 0) {
    throw FormatError("bad magic in '" + path + "'");
  }
  const std::string body = data.substr(8, data.size() - 12);
  ByteCursor tail{data, data.size() - 4, 0};
  const uint32_t stored = tail.u32();
  if (stored != crc32(body.data(), body.size())) {
    throw FormatError("model checksum mismatch in '" + path + "'");
  }

  ByteCursor c{body, 0, 8};
  const uint32_t cfg_len = c.u32();
  c.need(cfg_len);
  const json j = json::parse(body.substr(c.pos, cfg_len), nullptr, false);
  if (j.is_discarded()) throw FormatError("model config is not valid JSON");
  c.pos += cfg_len;

  RnnModel model = make_zero_model(config_from_json(j));
  for (auto& p : model.parameters()) {
    const uint64_t count = c.u64();
    if (count != p.size) {
      throw FormatError("parameter '" + std::string(p.name) + "' has " + std::to_string(count) +
                        " values, expected " + std::to_string(p.size));
    }
    for (size_t k = 0; k < p.size; ++k) p.data[k] = c.f64();
  }
  if (c.remaining() != 0) throw FormatError("trailing bytes in '" + path + "'");
  return model;
}

}  // namespace seer
