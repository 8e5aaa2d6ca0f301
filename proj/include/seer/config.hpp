#pragma once

#include <cstdint>
#include <string>

#include "seer/rnn.hpp"
#include "seer/sim.hpp"

namespace seer {

// Flat operator-facing configuration: one human-editable JSON file plus flag
// overrides (flags win). Field names double as the CLI flag names.
struct ScenarioConfig {
  std::string scene = "highway";  // highway | urban
  int num_lane_right = 3;
  int num_lane_left = 3;
  double lane_width = 6.5;   // m
  double road_length = 1000.0;  // m
  int num_agents = 12;
  uint64_t seed = 1;

  double traction = 0.5;
  double forward_slip_limit = 0.1;
  double sideway_slip_limit = 0.1;
  double engine_torque = 590.0;
  double brake_torque = 1475.0;
  double braking_force = 15000.0;
  double mass = 50.0;
  double max_speed = 25.0;

  int log_frequency = 20;  // readout period in units of 10 ms (20 = 5 Hz)
  std::string features = "a3";
  int seq_len = 12;
  uint64_t num_sequences = 5000;
  double test_fraction = 0.0;  // 0 = single file

  std::string cell = "lstm";
  int hidden_dim = 128;
  int embed_dim = 32;
  int epochs = 10;
  int batch_size = 64;
  double learning_rate = 1e-3;
  bool drop_stop = true;  // cleaning also removes stop-labeled sequences

  double kp = 0.5;
  double ki = 0.01;
  double kd = 0.3;
  double lane_change_distance = 35.0;

  int log_port = 0;      // 0 = streaming off
  int control_port = 0;  // 0 = controls on the log port only
  bool batchmode = false;  // run as fast as possible (no wall-clock pacing)

  void validate() const;  // ConfigError naming the field
  std::string to_json_string() const;
  static ScenarioConfig from_json_string(const std::string& text);  // strict keys
  static ScenarioConfig load(const std::string& path);

  SimConfig to_sim_config() const;
  RnnConfig to_rnn_config() const;
  FeatureVariant feature_variant() const { return feature_variant_from_name(features); }

  // Stable fingerprint of the effective settings, recorded in manifests.
  std::string hash() const;
};

}  // namespace seer
