#pragma once

#include <string>

#include "seer/planner.hpp"
#include "seer/rnn.hpp"
#include "seer/sim.hpp"

namespace seer {

// Scripted inference showcases driven by a trained model: a lane-change
// maneuver with live voting, and a merge conflict that trips the risk
// detector. Results stream to an NDJSON log plus optional SVG snapshots.
struct DemoConfig {
  std::string scenario = "lane_change";  // lane_change | conflict
  double duration_s = 14.0;
  double onset_t = 4.0;        // scripted maneuver start
  std::string log_path;        // empty = no log file
  std::string svg_dir;         // empty = no snapshots
  int svg_count = 0;
  PlannerConfig planner;
  PidGains gains;
  VehiclePhysicsParams physics;
  uint64_t seed = 1;
};

struct DemoResult {
  int onset_tick = -1;            // readout index where the truth label flips
  int vote_transition_tick = -1;  // readout index where the vote follows
  double maneuver_start_t = -1.0; // seconds, truth label span
  double maneuver_end_t = -1.0;
  uint64_t risk_flag_count = 0;
  uint64_t risk_ticks = 0;   // readout ticks with at least one flag
  double mean_latency_ms = 0.0;
  int readout_ticks = 0;
  int svg_written = 0;
};

DemoResult run_demo(const RnnModel& model, const DemoConfig& cfg);

}  // namespace seer
