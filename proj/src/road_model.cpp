#include "seer/road_model.hpp"

#include <cmath>
#include <string>

#include "seer/errors.hpp"

namespace seer {

double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * M_PI);
  if (a <= -M_PI) {
    a += 2.0 * M_PI;
  } else if (a > M_PI) {
    a -= 2.0 * M_PI;
  }
  return a;
}

RoadModel build_straight_highway(int num_lanes_right, int num_lanes_left,
                                 double lane_width, double road_length) {
  if (num_lanes_right < 1) {
    throw ConfigError("num_lanes_right must be >= 1, got " + std::to_string(num_lanes_right));
  }
  if (num_lanes_left < 0) {
    throw ConfigError("num_lanes_left must be >= 0, got " + std::to_string(num_lanes_left));
  }
  if (!(lane_width > 0.0)) {
    throw ConfigError("lane_width must be positive, got " + std::to_string(lane_width));
  }
  if (!(road_length > 0.0)) {
    throw ConfigError("road_length must be positive, got " + std::to_string(road_length));
  }
  return RoadModel{num_lanes_right, num_lanes_left, lane_width, road_length};
}

LaneFrame to_lane_frame(const RoadModel& road, double x, double y, double heading) {
  if (x < 0.0 || x > road.road_length || y < 0.0 || y > road.width()) {
    throw OutOfBoundsError("point (" + std::to_string(x) + ", " + std::to_string(y) +
                           ") outside road corridor");
  }
  int lane = static_cast<int>(std::floor(y / road.lane_width));
  if (lane >= road.num_lanes()) lane = road.num_lanes() - 1;
  // A point exactly on a lane boundary is equidistant to both neighbours;
  // ties go to the lower index.
  if (lane >= 1 && y == lane * road.lane_width) lane -= 1;

  LaneFrame lf;
  lf.s = x;
  lf.d = y - road.lane_center(lane);
  lf.lane_index = lane;
  lf.heading_rel = wrap_angle(heading);
  return lf;
}

void from_lane_frame(const RoadModel& road, const LaneFrame& lf,
                     double& x, double& y, double& heading) {
  if (lf.lane_index < 0 || lf.lane_index >= road.num_lanes()) {
    throw OutOfBoundsError("lane_index " + std::to_string(lf.lane_index) + " out of range");
  }
  if (lf.s < 0.0 || lf.s > road.road_length) {
    throw OutOfBoundsError("s " + std::to_string(lf.s) + " outside [0, road_length]");
  }
  x = lf.s;
  y = road.lane_center(lf.lane_index) + lf.d;
  heading = wrap_angle(lf.heading_rel);
}

}  // namespace seer
