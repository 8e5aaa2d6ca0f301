#include "seer/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "seer/errors.hpp"

namespace seer {

namespace {

double smoothstep(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}

// Nearest same-lane vehicle ahead of s; returns index or -1.
int find_lead(const RoadModel& road, int lane, double s,
              const std::vector<VehicleState>& traffic, double* gap_out) {
  int best = -1;
  double best_gap = std::numeric_limits<double>::max();
  for (size_t i = 0; i < traffic.size(); ++i) {
    const auto& v = traffic[i];
    if (v.x <= s) continue;
    LaneFrame lf;
    try {
      lf = to_lane_frame(road, v.x, v.y, v.heading);
    } catch (const OutOfBoundsError&) {
      continue;
    }
    if (lf.lane_index != lane) continue;
    const double gap = v.x - s;
    if (gap < best_gap) {
      best_gap = gap;
      best = static_cast<int>(i);
    }
  }
  if (best >= 0 && gap_out) *gap_out = best_gap;
  return best;
}

bool lane_is_clear(const RoadModel& road, int lane, double s,
                   const std::vector<VehicleState>& traffic, double clear_gap) {
  for (const auto& v : traffic) {
    LaneFrame lf;
    try {
      lf = to_lane_frame(road, v.x, v.y, v.heading);
    } catch (const OutOfBoundsError&) {
      continue;
    }
    if (lf.lane_index == lane && std::abs(v.x - s) < clear_gap) return false;
  }
  return true;
}

}  // namespace

const char* intention_name(Intention i) {
  switch (i) {
    case Intention::kLaneKeep: return "lane_keep";
    case Intention::kChangeLaneRight: return "change_lane_right";
    case Intention::kChangeLaneLeft: return "change_lane_left";
    case Intention::kDecelerate: return "decelerate";
    case Intention::kAccelerate: return "accelerate";
    case Intention::kCarFollow: return "car_follow";
    case Intention::kStop: return "stop";
  }
  return "unknown";
}

Path plan_path(Intention intention, const VehicleState& state, const RoadModel& road,
               const std::vector<VehicleState>& traffic, const PlannerConfig& cfg,
               std::optional<double> stop_line_s) {
  const LaneFrame lf = to_lane_frame(road, state.x, state.y, state.heading);
  const double s0 = lf.s;
  const double v0 = state.v_lon;

  const bool is_change =
      intention == Intention::kChangeLaneLeft || intention == Intention::kChangeLaneRight;

  int target_lane = lf.lane_index;
  if (is_change) {
    target_lane += (intention == Intention::kChangeLaneLeft) ? 1 : -1;
    if (target_lane < 0 || target_lane >= road.num_drivable_lanes()) {
      throw InfeasibleIntentionError(std::string("no ") +
                                     (intention == Intention::kChangeLaneLeft ? "left" : "right") +
                                     " lane from lane " + std::to_string(lf.lane_index));
    }
  }

  double horizon = cfg.horizon;
  if (is_change) horizon = std::max(horizon, cfg.lane_change_distance + 5.0 * cfg.spacing);

  const int max_points = static_cast<int>(horizon / cfg.spacing) + 1;
  std::vector<double> ss;
  ss.reserve(max_points);
  for (int i = 0; i < max_points; ++i) {
    const double s = s0 + i * cfg.spacing;
    if (s > road.road_length) break;
    ss.push_back(s);
  }
  if (ss.size() < 2) {
    throw OutOfBoundsError("path start too close to the road end (s = " + std::to_string(s0) + ")");
  }

  // Speed profile.
  double follow_target = v0;
  if (intention == Intention::kCarFollow) {
    double gap = 0.0;
    const int lead = find_lead(road, lf.lane_index, s0, traffic, &gap);
    if (lead >= 0) {
      follow_target = std::clamp(traffic[lead].v_lon + cfg.follow_gain * (gap - cfg.follow_gap),
                                 0.0, cfg.accel_ceiling);
    }
  }
  double s_stop = std::numeric_limits<double>::max();
  if (intention == Intention::kStop) {
    double gap = 0.0;
    const int lead = find_lead(road, lf.lane_index, s0, traffic, &gap);
    if (lead >= 0) s_stop = traffic[lead].x - cfg.stop_margin;
    if (stop_line_s) s_stop = std::min(s_stop, *stop_line_s - cfg.stop_margin);
    if (s_stop == std::numeric_limits<double>::max()) s_stop = s0;  // nothing given: stop here
  }

  const double y_from = road.lane_center(lf.lane_index);
  const double y_to = road.lane_center(target_lane);

  Path path;
  path.spacing = cfg.spacing;
  path.intention = intention;
  path.points.reserve(ss.size());

  for (const double s : ss) {
    const double ds = s - s0;
    Waypoint wp;
    wp.x = s;
    wp.y = is_change ? y_from + (y_to - y_from) * smoothstep(ds / cfg.lane_change_distance)
                     : y_from;
    switch (intention) {
      case Intention::kAccelerate:
        wp.target_speed =
            std::min(std::sqrt(v0 * v0 + 2.0 * cfg.speed_ramp_accel * ds), cfg.accel_ceiling);
        break;
      case Intention::kDecelerate:
        wp.target_speed =
            std::max(std::sqrt(std::max(v0 * v0 - 2.0 * cfg.speed_ramp_accel * ds, 0.0)),
                     cfg.decel_floor);
        break;
      case Intention::kCarFollow:
        wp.target_speed = follow_target;
        break;
      case Intention::kStop:
        wp.target_speed =
            s >= s_stop ? 0.0
                        : std::min(v0, std::sqrt(2.0 * cfg.stop_decel * (s_stop - s)));
        break;
      default:
        wp.target_speed = v0;
        break;
    }
    path.points.push_back(wp);
  }
  return path;
}

std::array<std::array<double, 2>, 4> OrientedRect::corners() const {
  const double c = std::cos(heading);
  const double s = std::sin(heading);
  std::array<std::array<double, 2>, 4> out;
  const double ex[4] = {+half_len, +half_len, -half_len, -half_len};
  const double ey[4] = {+half_wid, -half_wid, -half_wid, +half_wid};
  for (int i = 0; i < 4; ++i) {
    out[i][0] = cx + ex[i] * c - ey[i] * s;
    out[i][1] = cy + ex[i] * s + ey[i] * c;
  }
  return out;
}

namespace {

// Separating-axis test helper: project both rectangles onto the axes of `a`.
bool separated_on_axes(const OrientedRect& a, const OrientedRect& b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  const double axes[2][2] = {{std::cos(a.heading), std::sin(a.heading)},
                             {-std::sin(a.heading), std::cos(a.heading)}};
  for (const auto& ax : axes) {
    double amin = std::numeric_limits<double>::max(), amax = -amin;
    double bmin = amin, bmax = amax;
    for (int i = 0; i < 4; ++i) {
      const double pa = ca[i][0] * ax[0] + ca[i][1] * ax[1];
      const double pb = cb[i][0] * ax[0] + cb[i][1] * ax[1];
      amin = std::min(amin, pa);
      amax = std::max(amax, pa);
      bmin = std::min(bmin, pb);
      bmax = std::max(bmax, pb);
    }
    if (amax < bmin || bmax < amin) return true;
  }
  return false;
}

}  // namespace

bool rects_overlap(const OrientedRect& a, const OrientedRect& b) {
  return !separated_on_axes(a, b) && !separated_on_axes(b, a);
}

bool stop_trigger(const VehicleState& state, const Path& path,
                  const std::vector<VehicleState>& traffic, SignalState light,
                  const PlannerConfig& cfg) {
  if (light == SignalState::kRed) return true;
  if (path.points.size() < 2) return false;

  const size_t max_segments =
      std::min(path.points.size() - 1, static_cast<size_t>(cfg.lookahead / path.spacing) + 1);

  for (const auto& v : traffic) {
    if (v.x <= state.x) continue;  // forward scan only
    OrientedRect footprint{v.x, v.y, v.heading, cfg.vehicle_length / 2.0, cfg.vehicle_width / 2.0};
    for (size_t i = 0; i < max_segments; ++i) {
      const auto& p0 = path.points[i];
      const auto& p1 = path.points[i + 1];
      const double dx = p1.x - p0.x;
      const double dy = p1.y - p0.y;
      const double len = std::hypot(dx, dy);
      if (len <= 0.0) continue;
      OrientedRect corridor{(p0.x + p1.x) / 2.0, (p0.y + p1.y) / 2.0, std::atan2(dy, dx),
                            len / 2.0, cfg.corridor_half_width};
      if (rects_overlap(footprint, corridor)) return true;
    }
  }
  return false;
}

double cross_track_error(const Path& path, double x, double y, int* nearest_index) {
  if (path.points.size() < 2) throw ContractError("cross_track_error needs >= 2 waypoints");

  double best_d2 = std::numeric_limits<double>::max();
  double best_offset = 0.0;
  int best_idx = 0;
  for (size_t i = 0; i + 1 < path.points.size(); ++i) {
    const auto& p0 = path.points[i];
    const auto& p1 = path.points[i + 1];
    const double dx = p1.x - p0.x;
    const double dy = p1.y - p0.y;
    const double len2 = dx * dx + dy * dy;
    if (len2 <= 0.0) continue;
    double t = ((x - p0.x) * dx + (y - p0.y) * dy) / len2;
    t = std::clamp(t, 0.0, 1.0);
    const double px = p0.x + t * dx;
    const double py = p0.y + t * dy;
    const double d2 = (x - px) * (x - px) + (y - py) * (y - py);
    if (d2 < best_d2) {
      best_d2 = d2;
      // positive cross: vehicle lies left of the segment direction
      const double cross = dx * (y - py) - dy * (x - px);
      const double dist = std::sqrt(d2);
      best_offset = cross > 0.0 ? dist : -dist;
      best_idx = static_cast<int>(i + 1);  // look at the segment end for speed targets
    }
  }
  if (nearest_index) *nearest_index = best_idx;
  // Error of the path relative to the vehicle: positive when the path is to
  // the vehicle's left, so a positive steer command turns toward it.
  return -best_offset;
}

PidOutput pid_control(const Path& path, const VehicleState& state, const PidGains& gains,
                      const PidState& pid, double dt, const SpeedControl& speed) {
  if (!(dt > 0.0)) throw ConfigError("pid_control dt must be positive");

  int idx = 0;
  const double e = cross_track_error(path, state.x, state.y, &idx);

  PidState next = pid;
  next.integral = std::clamp(pid.integral + e * dt, -gains.integral_clamp, gains.integral_clamp);
  const double derivative = pid.has_prev ? (e - pid.prev_error) / dt : 0.0;
  next.prev_error = e;
  next.has_prev = true;

  Controls c;
  c.steer = std::clamp(gains.kp * e + gains.ki * next.integral + gains.kd * derivative, -1.0, 1.0);

  const double dv = path.points[idx].target_speed - state.v_lon;
  if (dv > speed.deadband) {
    c.throttle = std::min(speed.throttle_gain * dv, 1.0);
  } else if (dv < -speed.deadband) {
    c.brake = std::min(-speed.brake_gain * dv, 1.0);
  }
  return PidOutput{c, next, e};
}

SignalState signal_at(double t, const PolicyConfig& cfg) {
  const double period = cfg.signal_green_time + cfg.signal_red_time;
  const double phase = std::fmod(std::max(t, 0.0), period);
  return phase < cfg.signal_green_time ? SignalState::kGreen : SignalState::kRed;
}

ScenarioPolicy::ScenarioPolicy(uint64_t seed, int agent_id, const PolicyConfig& cfg)
    : rng_(mix_seed(seed, static_cast<uint64_t>(agent_id))), agent_id_(agent_id), cfg_(cfg) {}

void ScenarioPolicy::reseed(uint64_t seed) {
  rng_ = Rng(mix_seed(seed, static_cast<uint64_t>(agent_id_)));
  active_ = Intention::kLaneKeep;
  target_lane_ = -1;
  needs_schedule_ = true;
  recovering_ = false;
  forced_.reset();
}

void ScenarioPolicy::force(Intention intention) { forced_ = intention; }

void ScenarioPolicy::schedule_next_dwell(double t) {
  const double extra = std::max(cfg_.mean_dwell - cfg_.min_dwell, 0.1);
  next_branch_t_ = t + cfg_.min_dwell + rng_.exponential(extra);
}

Intention ScenarioPolicy::draw_maneuver(const VehicleState& state, const LaneFrame& lf,
                                        const RoadModel& road,
                                        const std::vector<VehicleState>& traffic,
                                        const PlannerConfig& planner_cfg) {
  struct Candidate {
    Intention intention;
    double weight;
  };
  std::vector<Candidate> candidates;

  const int lane = lf.lane_index;
  const bool fast_enough = state.v_lon >= cfg_.min_change_speed;
  if (fast_enough && lane + 1 < road.num_drivable_lanes() &&
      lane_is_clear(road, lane + 1, lf.s, traffic, cfg_.clear_gap)) {
    candidates.push_back({Intention::kChangeLaneLeft, cfg_.w_change_left});
  }
  if (fast_enough && lane - 1 >= 0 &&
      lane_is_clear(road, lane - 1, lf.s, traffic, cfg_.clear_gap)) {
    candidates.push_back({Intention::kChangeLaneRight, cfg_.w_change_right});
  }
  if (state.v_lon < planner_cfg.accel_ceiling - 2.0) {
    candidates.push_back({Intention::kAccelerate, cfg_.w_accel});
  }
  if (state.v_lon > planner_cfg.decel_floor + 2.0) {
    candidates.push_back({Intention::kDecelerate, cfg_.w_decel});
  }
  double gap = 0.0;
  if (find_lead(road, lane, lf.s, traffic, &gap) >= 0 && gap < cfg_.follow_engage_gap) {
    candidates.push_back({Intention::kCarFollow, cfg_.w_follow});
  }

  if (candidates.empty()) return Intention::kLaneKeep;

  double total = 0.0;
  for (const auto& c : candidates) total += c.weight;
  double u = rng_.uniform(0.0, total);
  for (const auto& c : candidates) {
    if (u < c.weight) return c.intention;
    u -= c.weight;
  }
  return candidates.back().intention;
}

Intention ScenarioPolicy::update(const VehicleState& state, const RoadModel& road,
                                 const std::vector<VehicleState>& traffic, SignalState light,
                                 double t, const PlannerConfig& planner_cfg) {
  const LaneFrame lf = to_lane_frame(road, state.x, state.y, state.heading);

  if (needs_schedule_) {
    schedule_next_dwell(t);
    needs_schedule_ = false;
  }
  if (cruise_speed_ < 0.0) cruise_speed_ = std::max(state.v_lon, cfg_.min_change_speed);

  if (forced_) {
    active_ = *forced_;
    forced_.reset();
    recovering_ = false;
    if (active_ == Intention::kChangeLaneLeft || active_ == Intention::kChangeLaneRight) {
      const int dir = active_ == Intention::kChangeLaneLeft ? 1 : -1;
      target_lane_ = lf.lane_index + dir;
      if (target_lane_ < 0 || target_lane_ >= road.num_drivable_lanes()) {
        active_ = Intention::kLaneKeep;
        target_lane_ = -1;
        schedule_next_dwell(t);
      }
    } else {
      phase_end_t_ = t + cfg_.maneuver_duration;
    }
  }

  // Stop guard: red light in the stop zone or a lead vehicle dangerously close.
  bool stop_needed = false;
  if (cfg_.urban && light == SignalState::kRed && lf.s >= cfg_.stop_line_s - cfg_.stop_zone &&
      lf.s <= cfg_.stop_line_s) {
    stop_needed = true;
  }
  double gap = 0.0;
  if (!stop_needed && find_lead(road, lf.lane_index, lf.s, traffic, &gap) >= 0 &&
      gap < cfg_.stop_engage_gap) {
    stop_needed = true;
  }
  if (stop_needed) {
    active_ = Intention::kStop;
    target_lane_ = -1;
    recovering_ = false;
    return active_;
  }
  if (active_ == Intention::kStop) {
    active_ = Intention::kLaneKeep;
    schedule_next_dwell(t);
  }

  // Maneuvers and stops leave the agent off its cruise speed; steer the speed
  // back before resuming the schedule (labeled as what it is).
  if (recovering_) {
    if (std::abs(state.v_lon - cruise_speed_) <= cfg_.cruise_capture) {
      recovering_ = false;
      active_ = Intention::kLaneKeep;
      schedule_next_dwell(t);
    }
    return active_;
  }
  if (active_ == Intention::kLaneKeep &&
      std::abs(state.v_lon - cruise_speed_) > cfg_.cruise_deficit) {
    const bool needs_accel = state.v_lon < cruise_speed_;
    double lead_gap = 0.0;
    const bool lead_near = find_lead(road, lf.lane_index, lf.s, traffic, &lead_gap) >= 0 &&
                           lead_gap < 2.0 * cfg_.stop_engage_gap;
    if (needs_accel && lead_near) {
      // Below cruise with a lead in the way: this is car following.
      active_ = Intention::kCarFollow;
      phase_end_t_ = t + cfg_.follow_duration;
    } else {
      recovering_ = true;
      active_ = needs_accel ? Intention::kAccelerate : Intention::kDecelerate;
    }
    return active_;
  }

  switch (active_) {
    case Intention::kLaneKeep:
      if (t >= next_branch_t_) {
        active_ = draw_maneuver(state, lf, road, traffic, planner_cfg);
        if (active_ == Intention::kLaneKeep) {
          next_branch_t_ = t + 1.0;  // nothing feasible, retry soon
        } else if (active_ == Intention::kChangeLaneLeft ||
                   active_ == Intention::kChangeLaneRight) {
          target_lane_ = lf.lane_index + (active_ == Intention::kChangeLaneLeft ? 1 : -1);
        } else if (active_ == Intention::kCarFollow) {
          phase_end_t_ = t + cfg_.follow_duration;
        } else {
          // Speed maneuvers stop once the ramp would saturate, so the label
          // never covers constant-speed travel.
          double ramp_time = cfg_.maneuver_duration;
          if (active_ == Intention::kAccelerate) {
            ramp_time = std::min(ramp_time,
                                 (planner_cfg.accel_ceiling - state.v_lon) /
                                     planner_cfg.speed_ramp_accel);
          } else if (active_ == Intention::kDecelerate) {
            ramp_time = std::min(ramp_time, (state.v_lon - planner_cfg.decel_floor) /
                                                planner_cfg.speed_ramp_accel);
          }
          phase_end_t_ = t + std::max(ramp_time, 0.5);
        }
      }
      break;
    case Intention::kChangeLaneLeft:
    case Intention::kChangeLaneRight:
      if (target_lane_ >= 0 &&
          std::abs(state.y - road.lane_center(target_lane_)) < planner_cfg.capture_tolerance) {
        active_ = Intention::kLaneKeep;
        target_lane_ = -1;
        schedule_next_dwell(t);
      }
      break;
    default:
      if (t >= phase_end_t_) {
        active_ = Intention::kLaneKeep;
        schedule_next_dwell(t);
      }
      break;
  }
  return active_;
}

}  // namespace seer
