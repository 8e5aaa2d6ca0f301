#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "seer/errors.hpp"
#include "seer/rng.hpp"
#include "seer/road_model.hpp"

using namespace seer;

TEST_CASE("straight highway lane centers") {
  const RoadModel road = build_straight_highway(3, 3, 6.5, 1000.0);
  CHECK(road.lane_center(0) == doctest::Approx(3.25));
  CHECK(road.lane_center(1) == doctest::Approx(9.75));
  CHECK(road.lane_center(2) == doctest::Approx(16.25));
  CHECK(road.num_drivable_lanes() == 3);
  CHECK(road.num_lanes() == 6);

  // adjacent centers differ by exactly one lane width
  for (int k = 0; k + 1 < road.num_lanes(); ++k) {
    CHECK(road.lane_center(k + 1) - road.lane_center(k) == doctest::Approx(6.5).epsilon(1e-12));
  }
}

TEST_CASE("single lane road") {
  const RoadModel road = build_straight_highway(1, 0, 4.0, 100.0);
  CHECK(road.lane_center(0) == doctest::Approx(2.0));
  CHECK(road.width() == doctest::Approx(4.0));
}

TEST_CASE("invalid dimensions are rejected") {
  CHECK_THROWS_AS(build_straight_highway(0, 0, 6.5, 1000.0), ConfigError);
  CHECK_THROWS_AS(build_straight_highway(3, 0, 0.0, 1000.0), ConfigError);
  CHECK_THROWS_AS(build_straight_highway(3, 0, 6.5, -1.0), ConfigError);
  CHECK_THROWS_AS(build_straight_highway(3, -1, 6.5, 1000.0), ConfigError);
}

TEST_CASE("on-center point maps to d = 0, heading_rel = 0") {
  const RoadModel road = build_straight_highway(3, 0, 6.5, 1000.0);
  const LaneFrame lf = to_lane_frame(road, 120.0, road.lane_center(1), 0.0);
  CHECK(lf.lane_index == 1);
  CHECK(lf.d == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(lf.s == doctest::Approx(120.0));
  CHECK(lf.heading_rel == doctest::Approx(0.0));
}

TEST_CASE("lane boundary ties go to the lower index") {
  const RoadModel road = build_straight_highway(3, 0, 6.5, 1000.0);
  const LaneFrame lf = to_lane_frame(road, 50.0, 6.5, 0.1);
  CHECK(lf.lane_index == 0);
  CHECK(lf.d == doctest::Approx(6.5 / 2.0));
}

TEST_CASE("out of corridor points are rejected") {
  const RoadModel road = build_straight_highway(3, 0, 6.5, 1000.0);
  CHECK_THROWS_AS(to_lane_frame(road, -1.0, 3.25, 0.0), OutOfBoundsError);
  CHECK_THROWS_AS(to_lane_frame(road, 1000.5, 3.25, 0.0), OutOfBoundsError);
  CHECK_THROWS_AS(to_lane_frame(road, 10.0, -0.01, 0.0), OutOfBoundsError);
  CHECK_THROWS_AS(to_lane_frame(road, 10.0, 19.6, 0.0), OutOfBoundsError);
}

TEST_CASE("from_lane_frame endpoints") {
  const RoadModel road = build_straight_highway(3, 0, 6.5, 1000.0);
  double x, y, heading;
  from_lane_frame(road, LaneFrame{0.0, 0.0, 0, 0.0}, x, y, heading);
  CHECK(x == doctest::Approx(0.0));
  CHECK(y == doctest::Approx(3.25));
  CHECK(heading == doctest::Approx(0.0));

  from_lane_frame(road, LaneFrame{1000.0, 0.0, 0, 0.0}, x, y, heading);
  CHECK(x == doctest::Approx(1000.0));
}

TEST_CASE("roundtrip world -> lane -> world is identity") {
  const RoadModel road = build_straight_highway(3, 2, 6.5, 1000.0);
  Rng rng(42);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(0.0, road.road_length);
    const double y = rng.uniform(0.0, road.width());
    const double heading = rng.uniform(-M_PI + 1e-9, M_PI);
    const LaneFrame lf = to_lane_frame(road, x, y, heading);
    double x2, y2, h2;
    from_lane_frame(road, lf, x2, y2, h2);
    CHECK(std::abs(x2 - x) < 1e-9);
    CHECK(std::abs(y2 - y) < 1e-9);
    CHECK(std::abs(h2 - heading) < 1e-12);
  }
}

TEST_CASE("assigned lane is the argmin over all lane centers") {
  const RoadModel road = build_straight_highway(3, 1, 5.0, 500.0);
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double y = rng.uniform(0.0, road.width());
    const LaneFrame lf = to_lane_frame(road, 10.0, y, 0.0);
    double best = 1e18;
    int best_lane = -1;
    for (int k = 0; k < road.num_lanes(); ++k) {
      const double dist = std::abs(y - road.lane_center(k));
      if (dist < best - 1e-15) {
        best = dist;
        best_lane = k;
      }
    }
    CHECK(lf.lane_index == best_lane);
    CHECK(std::abs(lf.d) <= road.lane_width / 2.0 + 1e-12);
  }
}

TEST_CASE("angle wrapping lands in (-pi, pi]") {
  CHECK(wrap_angle(M_PI) == doctest::Approx(M_PI));
  CHECK(wrap_angle(-M_PI) == doctest::Approx(M_PI));
  CHECK(wrap_angle(3.0 * M_PI) == doctest::Approx(M_PI));
  CHECK(wrap_angle(0.5) == doctest::Approx(0.5));
  CHECK(wrap_angle(2.0 * M_PI + 0.25) == doctest::Approx(0.25));
  CHECK(wrap_angle(-2.0 * M_PI - 0.25) == doctest::Approx(-0.25));
}
