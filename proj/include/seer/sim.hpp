#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "seer/dataset.hpp"
#include "seer/planner.hpp"
#include "seer/road_model.hpp"
#include "seer/vehicle.hpp"

namespace seer {

struct SimConfig {
  RoadModel road;
  VehiclePhysicsParams physics;
  PlannerConfig planner;
  PolicyConfig policy;
  PidGains gains;
  SpeedControl speed_control;
  SpawnConfig spawn;
  int num_agents = 12;
  uint64_t seed = 1;
  double dt = 0.01;             // s, physics step
  int log_every = 20;           // readout every N ticks (N x 10 ms; 20 = 5 Hz)
  double wrap_margin = 60.0;    // m before the road end at which agents respawn
  double replan_interval = 0.5; // s between keep/accelerate/decelerate replans
  // Scripted scenarios may pin exact start states instead of seeded spawning.
  std::vector<VehicleState> initial_states;
};

// Single-writer world loop: seeded scenario policies pick raw intentions,
// the planner turns them into paths, the PID tracks them, the vehicle model
// advances. Snapshots handed out are immutable values.
class Simulation {
 public:
  explicit Simulation(const SimConfig& cfg);

  // Advance one physics tick. On readout ticks returns one frame per agent,
  // otherwise an empty vector.
  std::vector<SimFrame> tick();

  uint64_t ticks() const { return ticks_; }
  double time() const { return static_cast<double>(ticks_) * cfg_.dt; }
  const RoadModel& road() const { return cfg_.road; }
  const SimConfig& config() const { return cfg_; }
  SignalState signal() const;

  std::vector<VehicleState> snapshot() const;
  Intention agent_intention(int agent) const;
  int agent_session(int agent) const;

  // Scripted maneuvers and external control.
  void force_intention(int agent, Intention intention);
  void schedule_intention(int agent, double t, Intention intention);
  void apply_external_controls(int agent, const Controls& controls, double hold_s = 0.5);
  void reseed(uint64_t seed);

  const ClampLog& clamp_log() const { return clamp_log_; }
  uint64_t off_road_clamps() const { return off_road_clamps_; }

 private:
  struct Agent {
    VehicleState state;
    ScenarioPolicy policy;
    PidState pid;
    Path path;
    Intention active = Intention::kLaneKeep;
    double last_plan_t = -1.0e9;
    int session = 0;
    std::optional<Controls> external;
    double external_until = 0.0;
    std::vector<std::pair<double, Intention>> scheduled;
  };

  void maybe_wrap(Agent& agent, int index);

  SimConfig cfg_;
  std::vector<Agent> agents_;
  uint64_t ticks_ = 0;
  ClampLog clamp_log_;
  uint64_t off_road_clamps_ = 0;
};

struct GenerateConfig {
  SimConfig sim;
  FeatureVariant variant = FeatureVariant::kA3;
  int seq_len = 12;
  uint64_t num_sequences = 5000;
  std::string scene = "highway";  // highway | urban
  std::string split = "all";
  size_t fifo_capacity = 1024;
  std::string config_hash;
  double max_sim_seconds = 0.0;  // 0 = auto bound
};

// Runs the producer/consumer recording pipeline until num_sequences are
// written, then finalizes the file and returns its manifest.
DatasetManifest generate_dataset(const GenerateConfig& cfg, const std::string& out_path);

// The desk-scale recording scene used by cross-validation and the acceptance
// runs: a short road (the longitudinal feature is normalized by road length,
// so a short road keeps speed changes visible), a tight cruise band, and a
// mostly-lane-keep maneuver mix.
SimConfig desk_dataset_sim_config();

}  // namespace seer
