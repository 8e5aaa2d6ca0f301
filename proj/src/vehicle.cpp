#include "seer/vehicle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "seer/errors.hpp"
#include "seer/rng.hpp"

namespace seer {

namespace {

double clamp_logged(double v, double lo, double hi, uint64_t* counter) {
  if (v < lo || v > hi) {
    if (counter) ++*counter;
    return std::clamp(v, lo, hi);
  }
  return v;
}

}  // namespace

double VehiclePhysicsParams::full_throttle_accel() const {
  return traction * std::min(engine_torque, slip_force()) / mass;
}

void VehiclePhysicsParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(engine_torque, "engine_torque");
  positive(brake_torque, "brake_torque");
  positive(braking_force, "braking_force");
  positive(mass, "mass");
  positive(max_speed, "max_speed");
  positive(wheelbase, "wheelbase");
  positive(max_tire_angle, "max_tire_angle");
  if (!(forward_slip_limit > 0.0 && forward_slip_limit <= 1.0)) {
    throw ConfigError("forward_slip_limit must be in (0, 1]");
  }
  if (!(sideway_slip_limit > 0.0 && sideway_slip_limit <= 1.0)) {
    throw ConfigError("sideway_slip_limit must be in (0, 1]");
  }
  if (!(traction > 0.0 && traction <= 1.0)) {
    throw ConfigError("traction must be in (0, 1]");
  }
}

VehicleState step(const VehicleState& state, const Controls& controls,
                  const VehiclePhysicsParams& params, double dt, ClampLog* clamp_log) {
  if (!(dt > 0.0 && dt <= 0.1)) {
    throw ConfigError("step dt must be in (0, 0.1], got " + std::to_string(dt));
  }

  const double throttle =
      clamp_logged(controls.throttle, 0.0, 1.0, clamp_log ? &clamp_log->throttle : nullptr);
  const double brake =
      clamp_logged(controls.brake, 0.0, 1.0, clamp_log ? &clamp_log->brake : nullptr);
  const double hand_brake =
      clamp_logged(controls.hand_brake, 0.0, 1.0, clamp_log ? &clamp_log->hand_brake : nullptr);
  const double steer =
      clamp_logged(controls.steer, -1.0, 1.0, clamp_log ? &clamp_log->steer : nullptr);

  // Longitudinal force: throttle drives, brake retards at braking_force with
  // the hand brake worth 3x, and the tire saturates at the slip-limited
  // force. Braking never reverses the motion.
  const double demand =
      throttle * params.engine_torque - (brake + 3.0 * hand_brake) * params.braking_force;
  const double tire_force = std::clamp(demand, -params.slip_force(), params.slip_force());
  const double accel = params.traction * tire_force / params.mass;

  VehicleState next = state;
  double v = state.v_lon + accel * dt;
  if (v < 0.0) v = 0.0;
  if (v > params.max_speed) v = params.max_speed;

  const double tire_angle = steer * params.max_tire_angle;
  const double yaw_rate = state.v_lon * std::tan(tire_angle) / params.wheelbase;

  next.x = state.x + state.v_lon * std::cos(state.heading) * dt;
  next.y = state.y + state.v_lon * std::sin(state.heading) * dt;
  next.heading = wrap_angle(state.heading + yaw_rate * dt);
  next.v_lon = v;
  next.v_lat = v * std::sin(next.heading);
  next.tire_angle = tire_angle;
  next.signal_left = controls.signal_left;
  next.signal_right = controls.signal_right;
  return next;
}

std::vector<VehicleState> spawn_traffic(const RoadModel& road, int n, uint64_t seed,
                                        const SpawnConfig& cfg) {
  if (n < 1) throw ConfigError("spawn_traffic needs n >= 1");
  if (cfg.speed_min < 0.0 || cfg.speed_max < cfg.speed_min) {
    throw ConfigError("invalid spawn speed range");
  }

  Rng rng(seed);
  const int lanes = road.num_drivable_lanes();
  std::vector<double> cursor(lanes, cfg.margin);
  std::vector<VehicleState> out;
  out.reserve(n);

  for (int i = 0; i < n; ++i) {
    const int lane = i % lanes;
    const double s = cursor[lane];
    if (s > road.road_length - cfg.margin) {
      throw CapacityError("road too short for " + std::to_string(n) + " vehicles");
    }
    VehicleState v;
    v.x = s;
    v.y = road.lane_center(lane);
    v.heading = 0.0;
    v.v_lon = rng.uniform(cfg.speed_min, cfg.speed_max);
    v.v_lat = 0.0;
    out.push_back(v);
    cursor[lane] = s + cfg.min_gap + rng.uniform(0.0, cfg.gap_jitter);
  }
  return out;
}

}  // namespace seer
