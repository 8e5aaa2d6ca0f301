#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "seer/errors.hpp"
#include "seer/rng.hpp"
#include "seer/rnn.hpp"

using namespace seer;

namespace {

std::string tmp_file(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

RnnConfig toy_config(CellKind cell, int seq_len = 6) {
  RnnConfig c;
  c.cell = cell;
  c.input_dim = 3;
  c.embed_dim = 4;
  c.hidden_dim = 8;
  c.num_classes = 5;
  c.seq_len = seq_len;
  c.seed = 21;
  return c;
}

Vec random_vec(int n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Vec v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Independent scalar implementations used as oracles below.
double naive_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vec naive_affine(const Mat& w, const Vec& x, const Mat& u, const Vec& h, const Vec* b) {
  Vec out(w.rows, 0.0);
  for (int r = 0; r < w.rows; ++r) {
    double acc = b ? (*b)[r] : 0.0;
    for (int c = 0; c < w.cols; ++c) acc += w(r, c) * x[c];
    for (int c = 0; c < u.cols; ++c) acc += u(r, c) * h[c];
    out[r] = acc;
  }
  return out;
}

CellState naive_lstm(const Vec& x, const CellState& prev, const RnnModel& m) {
  const int H = m.config.hidden_dim;
  const Vec zi = naive_affine(m.w_i, x, m.u_i, prev.h, &m.b_i);
  const Vec zo = naive_affine(m.w_o, x, m.u_o, prev.h, &m.b_o);
  const Vec zf = naive_affine(m.w_f, x, m.u_f, prev.h, &m.b_f);
  const Vec zg = naive_affine(m.w_g, x, m.u_g, prev.h, &m.b_g);
  CellState next;
  next.h.resize(H);
  next.c.resize(H);
  for (int k = 0; k < H; ++k) {
    const double i = naive_sigmoid(zi[k]);
    const double o = naive_sigmoid(zo[k]);
    const double f = naive_sigmoid(zf[k]);
    const double g = std::tanh(zg[k]);
    next.c[k] = i * g + f * prev.c[k];
    next.h[k] = o * std::tanh(next.c[k]);
  }
  return next;
}

CellState naive_gru(const Vec& x, const CellState& prev, const RnnModel& m) {
  const int H = m.config.hidden_dim;
  const Mat no_u(m.config.hidden_dim, 0);
  const Vec zz = naive_affine(m.w_z, x, m.u_z, prev.h, nullptr);
  const Vec zr = naive_affine(m.w_r, x, m.u_r, prev.h, nullptr);
  CellState next;
  next.h.resize(H);
  Vec sr(H);
  Vec r(H);
  for (int k = 0; k < H; ++k) {
    r[k] = naive_sigmoid(zr[k]);
    sr[k] = prev.h[k] * r[k];
  }
  const Vec zh = naive_affine(m.w_h, x, m.u_h, sr, nullptr);
  for (int k = 0; k < H; ++k) {
    const double z = naive_sigmoid(zz[k]);
    const double hb = std::tanh(zh[k]);
    next.h[k] = (1.0 - z) * hb + z * prev.h[k];
  }
  return next;
}

double batch_mean_loss(const std::vector<TrainingSample>& batch, const RnnModel& m) {
  double total = 0.0;
  for (const auto& sample : batch) {
    total += sequence_loss(forward(sample.features, m), sample.labels);
  }
  return total / static_cast<double>(batch.size());
}

std::vector<TrainingSample> random_batch(const RnnConfig& cfg, int n, uint64_t seed) {
  Rng rng(seed);
  std::vector<TrainingSample> batch(n);
  for (auto& sample : batch) {
    for (int t = 0; t < cfg.seq_len; ++t) {
      sample.features.push_back(random_vec(cfg.input_dim, rng));
      sample.labels.push_back(static_cast<uint8_t>(rng.uniform_int(cfg.num_classes)));
    }
  }
  return batch;
}

// Separable synthetic records: the lateral offset sign decides the label.
std::vector<SequenceRecord> synthetic_records(int n, int seq_len, uint64_t seed) {
  Rng rng(seed);
  std::vector<SequenceRecord> out;
  for (int i = 0; i < n; ++i) {
    SequenceRecord rec;
    rec.sequence_id = static_cast<uint64_t>(i);
    rec.agent_id = 0;
    rec.feature_dim = 3;
    const int label = static_cast<int>(rng.uniform_int(2));
    uint64_t t = 1000;
    for (int k = 0; k < seq_len; ++k) {
      SequenceFrame f;
      f.t_ms = t;
      t += kFramePeriodMs;
      f.label = static_cast<uint8_t>(label);
      f.features[0] = static_cast<float>((label == 0 ? 0.3 : -0.3) + rng.uniform(-0.05, 0.05));
      f.features[1] = static_cast<float>(rng.uniform(0.0, 1.0));
      f.features[2] = static_cast<float>(rng.uniform(-0.1, 0.1));
      rec.frames.push_back(f);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

TEST_CASE("embedding with zero weights collapses to zero") {
  RnnModel m = make_zero_model(toy_config(CellKind::kLstm));
  CHECK(embed({0.5, -0.2, 0.1}, m) == Vec(4, 0.0));
  std::fill(m.b_embed.begin(), m.b_embed.end(), -1.0);  // relu clips negatives
  CHECK(embed({0.5, -0.2, 0.1}, m) == Vec(4, 0.0));
}

TEST_CASE("embedding matches a naive matrix multiply") {
  Rng rng(4);
  RnnModel m = init_model(toy_config(CellKind::kLstm));
  const Vec x = random_vec(3, rng);
  const Vec got = embed(x, m);
  for (int r = 0; r < 4; ++r) {
    double acc = m.b_embed[r];
    for (int c = 0; c < 3; ++c) acc += m.w_embed(r, c) * x[c];
    CHECK(got[r] == doctest::Approx(std::max(acc, 0.0)).epsilon(1e-12));
  }
}

TEST_CASE("embedding rejects mismatched input width") {
  const RnnModel m = make_zero_model(toy_config(CellKind::kLstm));
  CHECK_THROWS_AS(embed({0.1, 0.2}, m), DataError);
}

TEST_CASE("zero-weight lstm step gives h = 0.5 tanh(0.5)") {
  const RnnModel m = make_zero_model(toy_config(CellKind::kLstm));
  CellState prev = make_initial_state(m.config);
  std::fill(prev.c.begin(), prev.c.end(), 1.0);
  const CellState next = lstm_step(Vec(4, 0.0), prev, m);
  for (int k = 0; k < 8; ++k) {
    CHECK(next.c[k] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(next.h[k] == doctest::Approx(0.5 * std::tanh(0.5)).epsilon(1e-9));
    CHECK(next.h[k] == doctest::Approx(0.231059).epsilon(1e-5));
  }
}

TEST_CASE("saturated forget and closed input gates pass memory through") {
  RnnModel m = make_zero_model(toy_config(CellKind::kLstm));
  std::fill(m.b_f.begin(), m.b_f.end(), 50.0);   // f -> 1
  std::fill(m.b_i.begin(), m.b_i.end(), -50.0);  // i -> 0
  CellState prev = make_initial_state(m.config);
  for (int k = 0; k < 8; ++k) prev.c[k] = 0.3 * (k + 1);
  const CellState next = lstm_step(Vec(4, 0.0), prev, m);
  for (int k = 0; k < 8; ++k) CHECK(next.c[k] == doctest::Approx(prev.c[k]).epsilon(1e-6));
}

TEST_CASE("lstm step matches the scalar oracle") {
  Rng rng(8);
  const RnnModel m = init_model(toy_config(CellKind::kLstm));
  CellState prev;
  prev.h = random_vec(8, rng);
  prev.c = random_vec(8, rng);
  const Vec x = random_vec(4, rng);
  const CellState got = lstm_step(x, prev, m);
  const CellState want = naive_lstm(x, prev, m);
  for (int k = 0; k < 8; ++k) {
    CHECK(got.h[k] == doctest::Approx(want.h[k]).epsilon(1e-12));
    CHECK(got.c[k] == doctest::Approx(want.c[k]).epsilon(1e-12));
  }
}

TEST_CASE("zero-weight gru step halves the previous state") {
  const RnnModel m = make_zero_model(toy_config(CellKind::kGru));
  CellState prev = make_initial_state(m.config);
  std::fill(prev.h.begin(), prev.h.end(), 1.0);
  const CellState next = gru_step(Vec(4, 0.0), prev, m);
  for (int k = 0; k < 8; ++k) CHECK(next.h[k] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("a saturated update gate copies the state") {
  RnnModel m = make_zero_model(toy_config(CellKind::kGru));
  for (int k = 0; k < 8; ++k) m.u_z(k, k) = 100.0;  // z -> 1 for positive state
  CellState prev = make_initial_state(m.config);
  for (int k = 0; k < 8; ++k) prev.h[k] = 0.2 + 0.05 * k;
  const CellState next = gru_step(Vec(4, 0.0), prev, m);
  for (int k = 0; k < 8; ++k) CHECK(next.h[k] == doctest::Approx(prev.h[k]).epsilon(1e-6));
}

TEST_CASE("gru step matches the scalar oracle") {
  Rng rng(9);
  const RnnModel m = init_model(toy_config(CellKind::kGru));
  CellState prev;
  prev.h = random_vec(8, rng);
  const Vec x = random_vec(4, rng);
  const CellState got = gru_step(x, prev, m);
  const CellState want = naive_gru(x, prev, m);
  for (int k = 0; k < 8; ++k) CHECK(got.h[k] == doctest::Approx(want.h[k]).epsilon(1e-12));
}

TEST_CASE("zero model logits are all zero") {
  const RnnConfig cfg = toy_config(CellKind::kLstm);
  const RnnModel m = make_zero_model(cfg);
  Rng rng(10);
  std::vector<Vec> seq;
  for (int t = 0; t < cfg.seq_len; ++t) seq.push_back(random_vec(3, rng));
  const Mat logits = forward(seq, m);
  for (double v : logits.a) CHECK(v == 0.0);
}

TEST_CASE("permuting output rows permutes logits identically") {
  const RnnConfig cfg = toy_config(CellKind::kLstm);
  RnnModel m = init_model(cfg);
  Rng rng(11);
  std::vector<Vec> seq;
  for (int t = 0; t < cfg.seq_len; ++t) seq.push_back(random_vec(3, rng));
  const Mat base = forward(seq, m);

  // swap class rows 1 and 3
  for (int c = 0; c < cfg.hidden_dim; ++c) std::swap(m.w_out(1, c), m.w_out(3, c));
  std::swap(m.b_out[1], m.b_out[3]);
  const Mat swapped = forward(seq, m);
  for (int t = 0; t < cfg.seq_len; ++t) {
    CHECK(swapped(t, 1) == doctest::Approx(base(t, 3)).epsilon(1e-15));
    CHECK(swapped(t, 3) == doctest::Approx(base(t, 1)).epsilon(1e-15));
    CHECK(swapped(t, 0) == doctest::Approx(base(t, 0)).epsilon(1e-15));
  }
}

TEST_CASE("forward matches a manual step-by-step pass, both cells") {
  for (const CellKind cell : {CellKind::kLstm, CellKind::kGru}) {
    const RnnConfig cfg = toy_config(cell);
    const RnnModel m = init_model(cfg);
    Rng rng(12);
    std::vector<Vec> seq;
    for (int t = 0; t < cfg.seq_len; ++t) seq.push_back(random_vec(3, rng));

    const Mat logits = forward(seq, m);
    CellState state = make_initial_state(cfg);
    for (int t = 0; t < cfg.seq_len; ++t) {
      const Vec e = embed(seq[t], m);
      state = cell == CellKind::kLstm ? naive_lstm(e, state, m) : naive_gru(e, state, m);
      for (int k = 0; k < cfg.num_classes; ++k) {
        double acc = m.b_out[k];
        for (int c = 0; c < cfg.hidden_dim; ++c) acc += m.w_out(k, c) * state.h[c];
        CHECK(logits(t, k) == doctest::Approx(acc).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("hidden states stay inside the unit box") {
  for (const CellKind cell : {CellKind::kLstm, CellKind::kGru}) {
    RnnConfig cfg = toy_config(cell);
    const RnnModel m = init_model(cfg);
    Rng rng(13);
    CellState state = make_initial_state(cfg);
    for (int t = 0; t < 50; ++t) {
      const Vec e = embed(random_vec(3, rng, -2.0, 2.0), m);
      state = cell == CellKind::kLstm ? lstm_step(e, state, m) : gru_step(e, state, m);
      for (double h : state.h) CHECK(std::abs(h) < 1.0);
    }
  }
}

TEST_CASE("uniform logits over five classes cost ln 5 per step") {
  const Mat logits(6, 5);
  const double loss = sequence_loss(logits, std::vector<uint8_t>(6, 2));
  CHECK(std::abs(loss - std::log(5.0)) < 1e-9);
}

TEST_CASE("loss decreases monotonically with the correct-class margin") {
  double prev = 1e9;
  for (const double margin : {1.0, 5.0, 10.0}) {
    Mat logits(1, 5);
    logits(0, 3) = margin;
    const double loss = sequence_loss(logits, {3});
    CHECK(loss < prev);
    prev = loss;
  }
  // ln(1 + 4 e^-10): effectively zero at margin 10
  CHECK(prev < 2e-4);
}

TEST_CASE("loss matches an independent log-sum-exp computation") {
  Rng rng(14);
  Mat logits(6, 5);
  for (auto& v : logits.a) v = rng.uniform(-4.0, 4.0);
  std::vector<uint8_t> labels;
  for (int t = 0; t < 6; ++t) labels.push_back(static_cast<uint8_t>(rng.uniform_int(5)));

  double expect = 0.0;
  for (int t = 0; t < 6; ++t) {
    double mx = -1e300;
    for (int k = 0; k < 5; ++k) mx = std::max(mx, logits(t, k));
    double lse = 0.0;
    for (int k = 0; k < 5; ++k) lse += std::exp(logits(t, k) - mx);
    expect += mx + std::log(lse) - logits(t, labels[t]);
  }
  expect /= 6.0;
  CHECK(sequence_loss(logits, labels) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("invalid label indices are data errors") {
  const Mat logits(6, 5);
  CHECK_THROWS_AS(sequence_loss(logits, std::vector<uint8_t>(6, 5)), DataError);
}

TEST_CASE("softmax normalizes to one") {
  Rng rng(15);
  for (int i = 0; i < 100; ++i) {
    const Vec p = softmax(random_vec(5, rng, -30.0, 30.0));
    double sum = 0.0;
    for (double v : p) sum += v;
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("output gradient for a one-step toy is the softmax residual outer product") {
  RnnConfig cfg = toy_config(CellKind::kLstm, 1);
  cfg.num_classes = 2;
  RnnModel m = init_model(cfg);
  // zero the output projection: uniform logits, p = (0.5, 0.5)
  std::fill(m.w_out.a.begin(), m.w_out.a.end(), 0.0);
  std::fill(m.b_out.begin(), m.b_out.end(), 0.0);

  const Vec x = {0.4, -0.3, 0.2};
  TrainingSample sample;
  sample.features = {x};
  sample.labels = {1};

  RnnModel grads = make_zero_model(cfg);
  backward({sample}, m, grads);

  const CellState h1 = lstm_step(embed(x, m), make_initial_state(cfg), m);
  for (int c = 0; c < cfg.hidden_dim; ++c) {
    CHECK(grads.w_out(0, c) == doctest::Approx(0.5 * h1.h[c]).epsilon(1e-12));
    CHECK(grads.w_out(1, c) == doctest::Approx(-0.5 * h1.h[c]).epsilon(1e-12));
  }
  CHECK(grads.b_out[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(grads.b_out[1] == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences for every group") {
  for (const CellKind cell : {CellKind::kLstm, CellKind::kGru}) {
    CAPTURE(cell_kind_name(cell));
    const RnnConfig cfg = toy_config(cell);
    RnnModel m = init_model(cfg);
    const auto batch = random_batch(cfg, 3, 33);

    RnnModel grads = make_zero_model(cfg);
    backward(batch, m, grads);

    const double eps = 1e-5;
    auto params = m.parameters();
    auto gparams = grads.parameters();
    REQUIRE(params.size() == gparams.size());
    double worst = 0.0;
    for (size_t g = 0; g < params.size(); ++g) {
      for (size_t k = 0; k < params[g].size; ++k) {
        double& w = params[g].data[k];
        const double keep = w;
        w = keep + eps;
        const double up = batch_mean_loss(batch, m);
        w = keep - eps;
        const double down = batch_mean_loss(batch, m);
        w = keep;
        const double fd = (up - down) / (2.0 * eps);
        const double an = gparams[g].data[k];
        const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
        worst = std::max(worst, rel);
      }
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("scaling the loss scales every gradient") {
  const RnnConfig cfg = toy_config(CellKind::kGru);
  const RnnModel m = init_model(cfg);
  const auto batch = random_batch(cfg, 2, 44);

  RnnModel g1 = make_zero_model(cfg);
  RnnModel g3 = make_zero_model(cfg);
  backward(batch, m, g1, 1.0);
  backward(batch, m, g3, 3.0);
  auto p1 = g1.parameters();
  auto p3 = g3.parameters();
  for (size_t g = 0; g < p1.size(); ++g) {
    for (size_t k = 0; k < p1[g].size; ++k) {
      CHECK(p3[g].data[k] == doctest::Approx(3.0 * p1[g].data[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("the gru carries fewer parameters than the lstm at equal dims") {
  const RnnConfig lstm_cfg = toy_config(CellKind::kLstm);
  RnnConfig gru_cfg = toy_config(CellKind::kGru);
  const RnnModel lstm = make_zero_model(lstm_cfg);
  const RnnModel gru = make_zero_model(gru_cfg);

  const size_t E = 4, H = 8, I = 3, C = 5;
  CHECK(lstm.parameter_count() == E * I + E + 4 * (H * E + H * H + H) + C * H + C);
  CHECK(gru.parameter_count() == E * I + E + 3 * (H * E + H * H) + C * H + C);
  CHECK(gru.parameter_count() < lstm.parameter_count());
}

TEST_CASE("model files roundtrip bit-exactly") {
  for (const CellKind cell : {CellKind::kLstm, CellKind::kGru}) {
    const RnnModel m = init_model(toy_config(cell));
    const std::string path = tmp_file("model_rt.seernet");
    save_model(m, path);
    const RnnModel loaded = load_model(path);
    CHECK(loaded == m);
  }
}

TEST_CASE("corrupt model files are rejected") {
  const RnnModel m = init_model(toy_config(CellKind::kLstm));
  const std::string path = tmp_file("model_bad.seernet");
  save_model(m, path);

  SUBCASE("truncated") {
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 16);
    CHECK_THROWS_AS(load_model(path), FormatError);
  }
  SUBCASE("wrong magic") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("WRONGMAG", 8);
    f.close();
    CHECK_THROWS_AS(load_model(path), FormatError);
  }
  SUBCASE("flipped parameter byte") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(600);
    char b = 0x7F;
    f.write(&b, 1);
    f.close();
    CHECK_THROWS_AS(load_model(path), FormatError);
  }
}

TEST_CASE("training is deterministic and the loss comes down") {
  RnnConfig cfg;
  cfg.cell = CellKind::kGru;
  cfg.input_dim = 3;
  cfg.embed_dim = 8;
  cfg.hidden_dim = 16;
  cfg.num_classes = 5;
  cfg.seq_len = 6;
  cfg.epochs = 12;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.01;
  cfg.seed = 77;
  const auto records = synthetic_records(80, 6, 55);

  const TrainResult a = train(records, cfg);
  const TrainResult b = train(records, cfg);
  CHECK(a.model == b.model);
  REQUIRE(a.log.size() == 12);
  CHECK(a.log.back().loss < a.log.front().loss);
  for (size_t i = 1; i < 5; ++i) CHECK(a.log[i].loss < a.log[0].loss);
  CHECK(a.log.back().accuracy > 0.9);  // separable toy data

  const std::string pa = tmp_file("det_a.seernet");
  const std::string pb = tmp_file("det_b.seernet");
  save_model(a.model, pa);
  save_model(b.model, pb);
  std::ifstream fa(pa, std::ios::binary), fb(pb, std::ios::binary);
  const std::string ba((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  const std::string bb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  CHECK(ba == bb);
}

TEST_CASE("an empty dataset cannot be trained on") {
  RnnConfig cfg = toy_config(CellKind::kLstm);
  cfg.seq_len = 6;
  CHECK_THROWS_AS(train({}, cfg), DataError);
}

TEST_CASE("raw labels in training data are rejected") {
  RnnConfig cfg = toy_config(CellKind::kLstm);
  cfg.seq_len = 6;
  auto records = synthetic_records(4, 6, 56);
  records[2].frames[3].label = 5;  // uncleaned label
  CHECK_THROWS_AS(train(records, cfg), DataError);
}

TEST_CASE("narrow records cannot feed a wider model") {
  RnnConfig cfg = toy_config(CellKind::kLstm);
  cfg.seq_len = 6;
  auto records = synthetic_records(4, 6, 57);
  for (auto& rec : records) rec.feature_dim = 2;
  CHECK_THROWS_AS(train(records, cfg), DataError);
}

TEST_CASE("wider records are truncated for a narrower model") {
  RnnConfig cfg = toy_config(CellKind::kGru);
  cfg.input_dim = 2;
  cfg.seq_len = 6;
  cfg.epochs = 1;
  const auto records = synthetic_records(8, 6, 58);  // dim 3
  const TrainResult r = train(records, cfg);
  CHECK(r.model.config.input_dim == 2);
}

TEST_CASE("per-step predictions have the right shape") {
  const RnnConfig cfg = toy_config(CellKind::kLstm);
  const RnnModel m = init_model(cfg);
  Rng rng(16);
  std::vector<std::vector<Vec>> batch;
  for (int i = 0; i < 3; ++i) {
    std::vector<Vec> seq;
    for (int t = 0; t < cfg.seq_len; ++t) seq.push_back(random_vec(3, rng));
    batch.push_back(std::move(seq));
  }
  const auto preds = predict_batch(m, batch);
  REQUIRE(preds.size() == 3);
  for (const auto& p : preds) {
    CHECK(p.size() == static_cast<size_t>(cfg.seq_len));
    for (int c : p) {
      CHECK(c >= 0);
      CHECK(c < cfg.num_classes);
    }
  }
}
