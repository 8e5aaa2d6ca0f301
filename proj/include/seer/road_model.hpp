#pragma once

namespace seer {

// Straight multi-lane road. World frame: x runs along the road from 0 to
// road_length, y is lateral with y = 0 at the rightmost road boundary and
// growing to the left. Lane k is centered at (k + 0.5) * lane_width; the
// right-hand-side lanes 0..num_lanes_right-1 are the drivable set, left-side
// lanes are represented for config parity but unused by default scenarios.
//
// Immutable after construction; safe to share across threads.
struct RoadModel {
  int num_lanes_right = 3;
  int num_lanes_left = 0;
  double lane_width = 6.5;     // m
  double road_length = 1000.0; // m

  int num_lanes() const { return num_lanes_right + num_lanes_left; }
  int num_drivable_lanes() const { return num_lanes_right; }
  double lane_center(int lane) const { return (lane + 0.5) * lane_width; }
  double width() const { return num_lanes() * lane_width; }
};

// Lane-relative pose. d is the signed offset from the center of lane_index,
// positive to the left; heading_rel is the heading minus the lane tangent,
// wrapped to (-pi, pi].
struct LaneFrame {
  double s = 0.0;
  double d = 0.0;
  int lane_index = 0;
  double heading_rel = 0.0;
};

// Wrap an angle to (-pi, pi].
double wrap_angle(double a);

// Throws ConfigError on non-positive dimensions or num_lanes_right < 1.
RoadModel build_straight_highway(int num_lanes_right, int num_lanes_left,
                                 double lane_width, double road_length);

// Nearest-lane-center assignment; boundary ties go to the lower lane index.
// Throws OutOfBoundsError when (x, y) is outside the road corridor.
LaneFrame to_lane_frame(const RoadModel& road, double x, double y, double heading);

// Inverse of to_lane_frame on the straight-road domain.
void from_lane_frame(const RoadModel& road, const LaneFrame& lf,
                     double& x, double& y, double& heading);

}  // namespace seer
