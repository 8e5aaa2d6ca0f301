#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "seer/fifo.hpp"
#include "seer/linalg.hpp"
#include "seer/planner.hpp"
#include "seer/road_model.hpp"
#include "seer/vehicle.hpp"

namespace seer {

// Feature variants: A2 = (d, s), A3 = (d, s, heading_rel). The enum value is
// the dimension.
enum class FeatureVariant : uint8_t { kA2 = 2, kA3 = 3 };

inline int feature_dim(FeatureVariant v) { return static_cast<int>(v); }
const char* feature_variant_name(FeatureVariant v);
FeatureVariant feature_variant_from_name(const std::string& name);  // ConfigError

// Normalized lane-frame features: d / lane_width, s / road_length,
// heading_rel / pi.
struct FeatureVector {
  std::array<double, 3> v{};
  int dim = 3;
};

FeatureVector extract_features(const VehicleState& state, const RoadModel& road,
                               FeatureVariant variant);
// Inverse of the normalization, for tests and debugging.
LaneFrame denormalize_features(const FeatureVector& f, const RoadModel& road);

// One sampled observation of one agent. session changes whenever the agent
// respawns/wraps, so recorded sequences never straddle a teleport.
struct SimFrame {
  int agent_id = 0;
  int session = 0;
  uint64_t tick = 0;
  uint64_t t_ms = 0;
  VehicleState state;
  Intention raw_label = Intention::kLaneKeep;
};

struct SequenceFrame {
  uint64_t t_ms = 0;
  uint8_t label = 0;                 // raw intention
  std::array<float, 3> features{};  // stored at file precision

  bool operator==(const SequenceFrame&) const = default;
};

struct SequenceRecord {
  uint64_t sequence_id = 0;
  uint32_t agent_id = 0;
  uint8_t scene = 0;  // 0 highway, 1 urban
  uint8_t feature_dim = 3;
  std::vector<SequenceFrame> frames;

  bool operator==(const SequenceRecord&) const = default;
  bool contains_label(Intention i) const;
};

constexpr int kFramePeriodMs = 200;  // 5 Hz readout
constexpr char kDatasetMagic[9] = "SEERSEQ1";

struct DatasetManifest {
  int version = 1;
  FeatureVariant variant = FeatureVariant::kA3;
  int seq_len = 12;
  int frame_period_ms = kFramePeriodMs;
  int num_classes = kNumTrainableClasses;
  uint64_t seed = 0;
  std::string scene = "highway";
  std::string split = "all";  // all | train | test
  uint64_t sequence_count = 0;
  std::array<uint64_t, 8> label_timestep_counts{};
  std::string config_hash;

  std::string to_json_string() const;
  static DatasetManifest from_json_string(const std::string& s);  // FormatError
};

// Windows per-agent frames into non-overlapping length-T records. Frames of
// different agents may interleave arbitrarily; a session change or a timing
// gap discards the partial window for that agent. Within a record the
// longitudinal feature is stored relative to the window's first frame, which
// removes the absolute road position from the learned signal.
class SequenceAssembler {
 public:
  SequenceAssembler(int seq_len, FeatureVariant variant, const RoadModel& road, uint8_t scene);

  std::optional<SequenceRecord> push(const SimFrame& frame);
  uint64_t frames_consumed() const { return frames_consumed_; }
  uint64_t sequences_emitted() const { return next_id_; }

 private:
  struct Pending {
    uint64_t t_ms = 0;
    uint8_t label = 0;
    FeatureVector features;
  };
  struct Buffer {
    int session = -1;
    std::vector<Pending> frames;
  };
  int seq_len_;
  FeatureVariant variant_;
  RoadModel road_;
  uint8_t scene_;
  uint64_t next_id_ = 0;
  uint64_t frames_consumed_ = 0;
  std::map<int, Buffer> buffers_;
};

// The window-relative shift shared by the assembler and the inference
// windows: s is re-based on the first frame of the window.
inline void rebase_window_s(std::vector<Vec>& window) {
  if (window.empty()) return;
  const double s0 = window.front()[1];
  for (auto& x : window) x[1] -= s0;
}

// Streams records to <path>.partial; finalize() assembles the container
// (magic, manifest, records) and removes the partial marker. If the writer is
// destroyed without finalize(), the partial file is removed.
class DatasetWriter {
 public:
  DatasetWriter(std::string path, DatasetManifest manifest);
  ~DatasetWriter();
  DatasetWriter(const DatasetWriter&) = delete;
  DatasetWriter& operator=(const DatasetWriter&) = delete;

  void append(const SequenceRecord& rec);
  uint64_t count() const { return manifest_.sequence_count; }
  void finalize();
  void abort();

 private:
  std::string path_;
  std::string partial_path_;
  DatasetManifest manifest_;
  std::ofstream out_;
  bool finalized_ = false;
  bool aborted_ = false;
};

// Pulls frames from the queue until it is closed; writes at most max_records
// sequences (draining the rest) and returns the number written. Sets
// target_reached the moment the cap is hit.
uint64_t record_stream(BoundedQueue<SimFrame>& in, SequenceAssembler& assembler,
                       DatasetWriter& writer, uint64_t max_records = UINT64_MAX,
                       std::atomic<bool>* target_reached = nullptr);

// Streaming reader; next() validates lengths and checksums and throws
// FormatError with the file offset on corruption.
class DatasetReader {
 public:
  explicit DatasetReader(const std::string& path);
  const DatasetManifest& manifest() const { return manifest_; }
  std::optional<SequenceRecord> next();

 private:
  std::ifstream in_;
  DatasetManifest manifest_;
  uint64_t records_read_ = 0;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<SequenceRecord> records;
};

// Reads the whole file and cross-checks the manifest counts.
Dataset read_dataset(const std::string& path);

// Convenience: write a complete dataset in one call.
void write_dataset(const std::string& path, const DatasetManifest& manifest,
                   const std::vector<SequenceRecord>& records);

// Deterministic seeded split; disjoint, union = input, test side holds
// round(n * test_fraction) records.
std::pair<std::vector<SequenceRecord>, std::vector<SequenceRecord>> split_train_test(
    const std::vector<SequenceRecord>& records, double test_fraction, uint64_t seed);

}  // namespace seer
