#pragma once

#include <cstdint>
#include <vector>

#include "seer/road_model.hpp"

namespace seer {

// Desk-scale longitudinal/kinematic-bicycle parameters. The torque entries
// are effective force constants for this model, not physical claims; see
// README for the exact force law.
struct VehiclePhysicsParams {
  double engine_torque = 590.0;    // effective drive force at full throttle, N
  double brake_torque = 1475.0;    // informational; hand brake applies 3x braking_force
  double braking_force = 15000.0;  // N at brake = 1
  double mass = 50.0;              // kg
  double forward_slip_limit = 0.1;
  double sideway_slip_limit = 0.1;
  double traction = 0.5;           // (0, 1]
  double max_speed = 25.0;         // m/s
  double wheelbase = 2.7;          // m
  double max_tire_angle = 0.6;     // rad

  // Longitudinal tire force saturates here (skid is slip limited).
  double slip_force() const { return forward_slip_limit * braking_force; }
  double full_throttle_accel() const;

  void validate() const;  // throws ConfigError
};

struct Controls {
  double throttle = 0.0;   // [0, 1]
  double brake = 0.0;      // [0, 1]
  double hand_brake = 0.0; // [0, 1]
  double steer = 0.0;      // [-1, 1]
  bool signal_left = false;
  bool signal_right = false;
};

struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;    // rad, world frame
  double v_lon = 0.0;      // m/s, >= 0
  double v_lat = 0.0;      // m/s, world-lateral component, derived
  double tire_angle = 0.0; // rad
  bool signal_left = false;
  bool signal_right = false;
};

// Counts of inputs that had to be clamped into their valid ranges.
struct ClampLog {
  uint64_t throttle = 0;
  uint64_t brake = 0;
  uint64_t hand_brake = 0;
  uint64_t steer = 0;
  uint64_t total() const { return throttle + brake + hand_brake + steer; }
};

// One explicit-Euler step of the vehicle model. Pure function; identical
// inputs give bit-identical outputs. dt must be in (0, 0.1] s. Out-of-range
// control inputs are clamped (and counted when a log is supplied).
VehicleState step(const VehicleState& state, const Controls& controls,
                  const VehiclePhysicsParams& params, double dt,
                  ClampLog* clamp_log = nullptr);

struct SpawnConfig {
  double min_gap = 10.0;     // m, same-lane center-to-center floor
  double gap_jitter = 25.0;  // m, extra seeded spacing
  double margin = 15.0;      // m, keep-away from both road ends
  double speed_min = 8.0;    // m/s
  double speed_max = 12.0;   // m/s
};

// Deterministic placement on lane centers of the drivable side, round-robin
// across lanes, same-lane gaps >= min_gap. Throws CapacityError when the
// road cannot hold n vehicles.
std::vector<VehicleState> spawn_traffic(const RoadModel& road, int n, uint64_t seed,
                                        const SpawnConfig& cfg = {});

}  // namespace seer
