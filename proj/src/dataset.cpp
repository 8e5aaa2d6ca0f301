#include "seer/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <numeric>

#include <json.hpp>

#include "seer/bytes.hpp"
#include "seer/crc32.hpp"
#include "seer/errors.hpp"
#include "seer/rng.hpp"

namespace seer {

namespace {

using nlohmann::json;

std::string serialize_record(const SequenceRecord& rec) {
  std::string out;
  out.reserve(16 + rec.frames.size() * (9 + 4 * rec.feature_dim));
  put_u64(out, rec.sequence_id);
  put_u32(out, rec.agent_id);
  put_u8(out, rec.scene);
  put_u8(out, rec.feature_dim);
  put_u16(out, static_cast<uint16_t>(rec.frames.size()));
  for (const auto& f : rec.frames) {
    put_u64(out, f.t_ms);
    put_u8(out, f.label);
    for (int k = 0; k < rec.feature_dim; ++k) put_f32(out, f.features[k]);
  }
  return out;
}

SequenceRecord deserialize_record(const std::string& payload, uint64_t base_offset) {
  ByteCursor c{payload, 0, base_offset};
  SequenceRecord rec;
  rec.sequence_id = c.u64();
  rec.agent_id = c.u32();
  rec.scene = c.u8();
  rec.feature_dim = c.u8();
  if (rec.feature_dim < 2 || rec.feature_dim > 3) {
    throw FormatError("bad feature_dim " + std::to_string(rec.feature_dim) + " at offset " +
                      std::to_string(base_offset));
  }
  const uint16_t n = c.u16();
  rec.frames.resize(n);
  for (auto& f : rec.frames) {
    f.t_ms = c.u64();
    f.label = c.u8();
    for (int k = 0; k < rec.feature_dim; ++k) f.features[k] = c.f32();
  }
  if (c.pos != payload.size()) {
    throw FormatError("trailing bytes in record at offset " + std::to_string(base_offset));
  }
  return rec;
}

uint32_t read_u32_le(std::ifstream& in, bool* eof_ok, uint64_t offset) {
  char b[4];
  in.read(b, 4);
  if (in.gcount() == 0 && in.eof()) {
    if (eof_ok) {
      *eof_ok = true;
      return 0;
    }
  }
  if (in.gcount() != 4) {
    throw FormatError("truncated file at offset " + std::to_string(offset));
  }
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(b[i])) << (8 * i);
  return v;
}

}  // namespace

const char* feature_variant_name(FeatureVariant v) {
  return v == FeatureVariant::kA2 ? "a2" : "a3";
}

FeatureVariant feature_variant_from_name(const std::string& name) {
  if (name == "a2" || name == "A2") return FeatureVariant::kA2;
  if (name == "a3" || name == "A3") return FeatureVariant::kA3;
  throw ConfigError("unknown feature variant '" + name + "' (expected a2 or a3)");
}

FeatureVector extract_features(const VehicleState& state, const RoadModel& road,
                               FeatureVariant variant) {
  const LaneFrame lf = to_lane_frame(road, state.x, state.y, state.heading);
  FeatureVector f;
  f.dim = feature_dim(variant);
  f.v[0] = lf.d / road.lane_width;
  f.v[1] = lf.s / road.road_length;
  f.v[2] = variant == FeatureVariant::kA3 ? lf.heading_rel / M_PI : 0.0;
  return f;
}

LaneFrame denormalize_features(const FeatureVector& f, const RoadModel& road) {
  LaneFrame lf;
  lf.d = f.v[0] * road.lane_width;
  lf.s = f.v[1] * road.road_length;
  lf.heading_rel = f.dim >= 3 ? f.v[2] * M_PI : 0.0;
  return lf;
}

bool SequenceRecord::contains_label(Intention i) const {
  const uint8_t target = static_cast<uint8_t>(i);
  return std::any_of(frames.begin(), frames.end(),
                     [target](const SequenceFrame& f) { return f.label == target; });
}

std::string DatasetManifest::to_json_string() const {
  json j;
  j["version"] = version;
  j["variant"] = feature_variant_name(variant);
  j["seq_len"] = seq_len;
  j["frame_period_ms"] = frame_period_ms;
  j["num_classes"] = num_classes;
  j["seed"] = seed;
  j["scene"] = scene;
  j["split"] = split;
  j["sequence_count"] = sequence_count;
  j["label_timestep_counts"] = label_timestep_counts;
  j["config_hash"] = config_hash;
  return j.dump();
}

DatasetManifest DatasetManifest::from_json_string(const std::string& s) {
  json j = json::parse(s, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw FormatError("manifest is not valid JSON");
  try {
    DatasetManifest m;
    m.version = j.at("version").get<int>();
    if (m.version != 1) {
      throw FormatError("unsupported dataset version " + std::to_string(m.version));
    }
    m.variant = feature_variant_from_name(j.at("variant").get<std::string>());
    m.seq_len = j.at("seq_len").get<int>();
    m.frame_period_ms = j.at("frame_period_ms").get<int>();
    m.num_classes = j.at("num_classes").get<int>();
    m.seed = j.at("seed").get<uint64_t>();
    m.scene = j.at("scene").get<std::string>();
    m.split = j.at("split").get<std::string>();
    m.sequence_count = j.at("sequence_count").get<uint64_t>();
    auto counts = j.at("label_timestep_counts").get<std::vector<uint64_t>>();
    if (counts.size() != m.label_timestep_counts.size()) {
      throw FormatError("manifest label_timestep_counts has wrong length");
    }
    std::copy(counts.begin(), counts.end(), m.label_timestep_counts.begin());
    m.config_hash = j.at("config_hash").get<std::string>();
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("bad manifest: ") + e.what());
  }
}

SequenceAssembler::SequenceAssembler(int seq_len, FeatureVariant variant, const RoadModel& road,
                                     uint8_t scene)
    : seq_len_(seq_len), variant_(variant), road_(road), scene_(scene) {
  if (seq_len_ != 6 && seq_len_ != 12) {
    throw ConfigError("sequence length must be 6 or 12, got " + std::to_string(seq_len));
  }
}

std::optional<SequenceRecord> SequenceAssembler::push(const SimFrame& frame) {
  ++frames_consumed_;
  auto& buf = buffers_[frame.agent_id];
  if (buf.session != frame.session) {
    buf.session = frame.session;
    buf.frames.clear();
  }
  if (!buf.frames.empty()) {
    const int64_t dt = static_cast<int64_t>(frame.t_ms) - static_cast<int64_t>(buf.frames.back().t_ms);
    if (std::abs(dt - kFramePeriodMs) > 1) {
      buf.frames.clear();  // timing gap: restart the window
    }
  }

  Pending p;
  p.t_ms = frame.t_ms;
  p.label = static_cast<uint8_t>(frame.raw_label);
  p.features = extract_features(frame.state, road_, variant_);
  buf.frames.push_back(p);

  if (static_cast<int>(buf.frames.size()) < seq_len_) return std::nullopt;

  SequenceRecord rec;
  rec.sequence_id = next_id_++;
  rec.agent_id = static_cast<uint32_t>(frame.agent_id);
  rec.scene = scene_;
  rec.feature_dim = static_cast<uint8_t>(feature_dim(variant_));
  const double s0 = buf.frames.front().features.v[1];
  rec.frames.reserve(buf.frames.size());
  for (const auto& q : buf.frames) {
    SequenceFrame sf;
    sf.t_ms = q.t_ms;
    sf.label = q.label;
    sf.features[0] = static_cast<float>(q.features.v[0]);
    sf.features[1] = static_cast<float>(q.features.v[1] - s0);  // window-relative s
    if (feature_dim(variant_) > 2) sf.features[2] = static_cast<float>(q.features.v[2]);
    rec.frames.push_back(sf);
  }
  buf.frames.clear();
  return rec;
}

DatasetWriter::DatasetWriter(std::string path, DatasetManifest manifest)
    : path_(std::move(path)), partial_path_(path_ + ".partial"), manifest_(std::move(manifest)) {
  manifest_.sequence_count = 0;
  manifest_.label_timestep_counts.fill(0);
  out_.open(partial_path_, std::ios::binary | std::ios::trunc);
  if (!out_) throw FormatError("cannot open '" + partial_path_ + "' for writing");
}

DatasetWriter::~DatasetWriter() {
  if (!finalized_ && !aborted_) abort();
}

void DatasetWriter::append(const SequenceRecord& rec) {
  if (finalized_ || aborted_) throw ContractError("append after finalize/abort");
  const std::string payload = serialize_record(rec);
  std::string block;
  block.reserve(payload.size() + 8);
  put_u32(block, static_cast<uint32_t>(payload.size()));
  block += payload;
  put_u32(block, crc32(payload.data(), payload.size()));
  out_.write(block.data(), static_cast<std::streamsize>(block.size()));
  if (!out_) {
    abort();
    throw FormatError("write failed on '" + partial_path_ + "'");
  }
  ++manifest_.sequence_count;
  for (const auto& f : rec.frames) {
    if (f.label < manifest_.label_timestep_counts.size()) {
      ++manifest_.label_timestep_counts[f.label];
    }
  }
}

void DatasetWriter::finalize() {
  if (finalized_ || aborted_) throw ContractError("finalize after finalize/abort");
  out_.flush();
  out_.close();
  if (!out_.good()) {
    abort();
    throw FormatError("flush failed on '" + partial_path_ + "'");
  }

  std::ofstream final_out(path_, std::ios::binary | std::ios::trunc);
  if (!final_out) throw FormatError("cannot open '" + path_ + "' for writing");
  final_out.write(kDatasetMagic, 8);
  const std::string manifest_json = manifest_.to_json_string();
  std::string len;
  put_u32(len, static_cast<uint32_t>(manifest_json.size()));
  final_out.write(len.data(), 4);
  final_out.write(manifest_json.data(), static_cast<std::streamsize>(manifest_json.size()));

  // operator<<(rdbuf) raises failbit when the source is empty; skip the copy
  // for zero-record files.
  if (std::filesystem::file_size(partial_path_) > 0) {
    std::ifstream partial(partial_path_, std::ios::binary);
    final_out << partial.rdbuf();
  }
  final_out.close();
  if (!final_out.good()) {
    std::filesystem::remove(path_);
    abort();
    throw FormatError("finalize failed on '" + path_ + "'");
  }
  std::filesystem::remove(partial_path_);
  finalized_ = true;
}

void DatasetWriter::abort() {
  if (out_.is_open()) out_.close();
  std::error_code ec;
  std::filesystem::remove(partial_path_, ec);
  aborted_ = true;
}

uint64_t record_stream(BoundedQueue<SimFrame>& in, SequenceAssembler& assembler,
                       DatasetWriter& writer, uint64_t max_records,
                       std::atomic<bool>* target_reached) {
  uint64_t written = 0;
  SimFrame frame;
  while (in.pop(frame)) {
    if (written >= max_records) continue;  // drain so the producer never blocks
    if (auto rec = assembler.push(frame)) {
      writer.append(*rec);
      if (++written >= max_records && target_reached) target_reached->store(true);
    }
  }
  return written;
}

DatasetReader::DatasetReader(const std::string& path) : in_(path, std::ios::binary) {
  if (!in_) throw FormatError("cannot open '" + path + "'");
  char magic[8];
  in_.read(magic, 8);
  if (in_.gcount() != 8 || std::memcmp(magic, kDatasetMagic, 8) != 0) {
    throw FormatError("bad magic in '" + path + "'");
  }
  const uint32_t len = read_u32_le(in_, nullptr, 8);
  if (len > (1u << 20)) throw FormatError("manifest length " + std::to_string(len) + " too large");
  std::string blob(len, '\0');
  in_.read(blob.data(), len);
  if (in_.gcount() != static_cast<std::streamsize>(len)) {
    throw FormatError("truncated manifest in '" + path + "'");
  }
  manifest_ = DatasetManifest::from_json_string(blob);
}

std::optional<SequenceRecord> DatasetReader::next() {
  const uint64_t offset = static_cast<uint64_t>(in_.tellg());
  bool eof = false;
  const uint32_t len = read_u32_le(in_, &eof, offset);
  if (eof) return std::nullopt;
  if (len == 0 || len > (16u << 20)) {
    throw FormatError("bad record length " + std::to_string(len) + " at offset " +
                      std::to_string(offset));
  }
  std::string payload(len, '\0');
  in_.read(payload.data(), len);
  if (in_.gcount() != static_cast<std::streamsize>(len)) {
    throw FormatError("truncated record at offset " + std::to_string(offset));
  }
  const uint32_t stored_crc = read_u32_le(in_, nullptr, offset + 4 + len);
  const uint32_t computed = crc32(payload.data(), payload.size());
  if (stored_crc != computed) {
    throw FormatError("crc mismatch at offset " + std::to_string(offset));
  }
  SequenceRecord rec = deserialize_record(payload, offset + 4);
  if (static_cast<int>(rec.frames.size()) != manifest_.seq_len) {
    throw FormatError("record length " + std::to_string(rec.frames.size()) +
                      " does not match manifest seq_len at offset " + std::to_string(offset));
  }
  for (size_t i = 1; i < rec.frames.size(); ++i) {
    const int64_t dt =
        static_cast<int64_t>(rec.frames[i].t_ms) - static_cast<int64_t>(rec.frames[i - 1].t_ms);
    if (std::abs(dt - manifest_.frame_period_ms) > 1) {
      throw FormatError("non-monotone frame timestamps at offset " + std::to_string(offset));
    }
  }
  ++records_read_;
  return rec;
}

Dataset read_dataset(const std::string& path) {
  DatasetReader reader(path);
  Dataset ds;
  ds.manifest = reader.manifest();
  ds.records.reserve(ds.manifest.sequence_count);
  while (auto rec = reader.next()) ds.records.push_back(std::move(*rec));
  if (ds.records.size() != ds.manifest.sequence_count) {
    throw FormatError("manifest declares " + std::to_string(ds.manifest.sequence_count) +
                      " sequences but file holds " + std::to_string(ds.records.size()));
  }
  return ds;
}

void write_dataset(const std::string& path, const DatasetManifest& manifest,
                   const std::vector<SequenceRecord>& records) {
  DatasetWriter writer(path, manifest);
  for (const auto& rec : records) writer.append(rec);
  writer.finalize();
}

std::pair<std::vector<SequenceRecord>, std::vector<SequenceRecord>> split_train_test(
    const std::vector<SequenceRecord>& records, double test_fraction, uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test_fraction must be in (0, 1)");
  }
  const size_t n = records.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, 0xDA7A));
  for (size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[rng.uniform_int(i)]);
  }
  const size_t n_test = static_cast<size_t>(std::llround(static_cast<double>(n) * test_fraction));
  std::vector<bool> is_test(n, false);
  for (size_t i = 0; i < n_test && i < n; ++i) is_test[order[i]] = true;

  std::pair<std::vector<SequenceRecord>, std::vector<SequenceRecord>> out;
  out.first.reserve(n - n_test);
  out.second.reserve(n_test);
  for (size_t i = 0; i < n; ++i) {
    (is_test[i] ? out.second : out.first).push_back(records[i]);
  }
  return out;
}

}  // namespace seer
