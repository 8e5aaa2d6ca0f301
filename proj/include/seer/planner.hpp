#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "seer/rng.hpp"
#include "seer/road_model.hpp"
#include "seer/vehicle.hpp"

namespace seer {

// Short-term driving intentions. Classes 0..4 are the trainable set;
// CarFollow and Stop are raw planner behaviors that the cleaning pass
// removes before any training or evaluation.
enum class Intention : uint8_t {
  kLaneKeep = 0,
  kChangeLaneRight = 1,
  kChangeLaneLeft = 2,
  kDecelerate = 3,
  kAccelerate = 4,
  kCarFollow = 5,
  kStop = 6,
};

constexpr int kNumTrainableClasses = 5;

inline bool is_trainable(Intention i) { return static_cast<int>(i) < kNumTrainableClasses; }
const char* intention_name(Intention i);

struct Waypoint {
  double x = 0.0;
  double y = 0.0;
  double target_speed = 0.0;  // m/s, >= 0
};

struct Path {
  std::vector<Waypoint> points;  // fixed spacing along s
  double spacing = 1.0;          // m, in (0, 5]
  Intention intention = Intention::kLaneKeep;

  double length() const { return points.empty() ? 0.0 : spacing * (points.size() - 1); }
};

struct PlannerConfig {
  double spacing = 1.0;               // m between waypoints
  double horizon = 80.0;              // m of path
  double lane_change_distance = 35.0; // m of longitudinal blend
  double speed_ramp_accel = 2.0;      // m/s^2 for accelerate/decelerate targets
  double decel_floor = 3.0;           // m/s, decelerate never plans below
  double accel_ceiling = 14.0;        // m/s, accelerate never plans above
  double follow_gap = 20.0;           // m, car-follow target gap
  double follow_gain = 0.25;          // (m/s) per m of gap error
  double stop_margin = 8.0;           // m short of obstacle / stop line
  double stop_decel = 2.5;            // m/s^2 planned braking toward a stop
  double lookahead = 30.0;            // m, stop-trigger scan distance
  double corridor_half_width = 1.3;   // m, half width of the swept path corridor
  double vehicle_length = 4.5;        // m, footprint for conflict checks
  double vehicle_width = 2.0;         // m
  double capture_tolerance = 0.2;     // m, lane-change completion threshold
};

// Cross-track-error PID gains. Values are engineering defaults frozen by the
// closed-loop step-response test, not physical constants.
struct PidGains {
  double kp = 0.5;
  double ki = 0.01;
  double kd = 0.3;
  double integral_clamp = 5.0;  // m*s
};

struct PidState {
  double integral = 0.0;    // clamped running integral of e
  double prev_error = 0.0;  // e(t - dt)
  bool has_prev = false;    // derivative contributes 0 on the first step
};

// Longitudinal proportional law on (target_speed - v_lon).
struct SpeedControl {
  double throttle_gain = 0.5;  // throttle per m/s of deficit
  double brake_gain = 0.05;    // brake per m/s of excess
  double deadband = 0.02;      // m/s, coast inside this band
};

enum class SignalState : uint8_t { kGreen = 0, kRed = 1 };

// Generate the waypoint path for one intention from the current state.
// traffic must not contain the planning vehicle itself. Throws
// InfeasibleIntentionError when a lane change has no target lane.
Path plan_path(Intention intention, const VehicleState& state, const RoadModel& road,
               const std::vector<VehicleState>& traffic, const PlannerConfig& cfg = {},
               std::optional<double> stop_line_s = std::nullopt);

// True iff a traffic footprint intersects the path corridor within the
// lookahead, or the light is red.
bool stop_trigger(const VehicleState& state, const Path& path,
                  const std::vector<VehicleState>& traffic, SignalState light,
                  const PlannerConfig& cfg = {});

struct PidOutput {
  Controls controls;
  PidState state;
  double cross_track_error = 0.0;
};

// One control step tracking the path: steering from the PID on cross-track
// error, throttle/brake from the proportional speed law.
PidOutput pid_control(const Path& path, const VehicleState& state, const PidGains& gains,
                      const PidState& pid, double dt, const SpeedControl& speed = {});

// Signed cross-track error of the path relative to the vehicle: positive when
// the nearest path segment lies to the vehicle's left.
double cross_track_error(const Path& path, double x, double y, int* nearest_index = nullptr);

// Axis-oriented rectangle with heading, for footprint/corridor overlap.
struct OrientedRect {
  double cx = 0.0;
  double cy = 0.0;
  double heading = 0.0;
  double half_len = 0.0;
  double half_wid = 0.0;

  std::array<std::array<double, 2>, 4> corners() const;
};

bool rects_overlap(const OrientedRect& a, const OrientedRect& b);

// Seeded per-agent schedule of raw intentions: dwell in lane keep, branch
// into the other maneuvers, return on completion. Lane changes persist until
// the vehicle captures the target lane center.
struct PolicyConfig {
  double mean_dwell = 6.0;          // s of lane keep between maneuvers
  double min_dwell = 2.0;           // s
  double maneuver_duration = 3.0;   // s for accelerate/decelerate
  double follow_duration = 4.0;     // s
  double follow_engage_gap = 30.0;  // m, lead distance that allows car follow
  double stop_engage_gap = 12.0;    // m, lead distance that forces a stop
  double clear_gap = 15.0;          // m required in the target lane
  double min_change_speed = 7.0;    // m/s, no lane changes below this
  double cruise_deficit = 1.2;      // m/s off cruise that triggers recovery
  double cruise_capture = 0.3;      // m/s, speed recovery ends here
  // relative draw weights of the maneuvers
  double w_change_left = 0.24;
  double w_change_right = 0.24;
  double w_accel = 0.16;
  double w_decel = 0.16;
  double w_follow = 0.20;
  bool urban = false;
  double stop_line_s = 500.0;       // m, urban stop line
  double stop_zone = 60.0;          // m before the line where a red light bites
  double signal_green_time = 25.0;  // s
  double signal_red_time = 15.0;    // s
};

class ScenarioPolicy {
 public:
  ScenarioPolicy(uint64_t seed, int agent_id, const PolicyConfig& cfg = {});

  // Active raw intention for this tick. traffic excludes the agent itself.
  Intention update(const VehicleState& state, const RoadModel& road,
                   const std::vector<VehicleState>& traffic, SignalState light, double t,
                   const PlannerConfig& planner_cfg = {});

  // Force a maneuver from the outside (scripted demos, control messages).
  // Lane changes persist until capture as usual.
  void force(Intention intention);

  void reseed(uint64_t seed);

  Intention active() const { return active_; }
  int target_lane() const { return target_lane_; }

 private:
  void schedule_next_dwell(double t);
  Intention draw_maneuver(const VehicleState& state, const LaneFrame& lf, const RoadModel& road,
                          const std::vector<VehicleState>& traffic,
                          const PlannerConfig& planner_cfg);

  Rng rng_;
  int agent_id_ = 0;
  PolicyConfig cfg_;
  Intention active_ = Intention::kLaneKeep;
  double phase_end_t_ = 0.0;   // time-based maneuvers end here
  double next_branch_t_ = 0.0; // next draw while lane keeping
  int target_lane_ = -1;       // lane-change goal
  bool needs_schedule_ = true;
  double cruise_speed_ = -1.0; // captured on the first update
  bool recovering_ = false;    // accelerate back to cruise, ends on speed
  std::optional<Intention> forced_;
};

// Urban traffic signal: green for green_time, red for red_time, repeating.
SignalState signal_at(double t, const PolicyConfig& cfg);

}  // namespace seer
