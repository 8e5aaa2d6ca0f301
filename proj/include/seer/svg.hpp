#pragma once

#include <optional>
#include <string>
#include <vector>

#include "seer/infer.hpp"
#include "seer/planner.hpp"
#include "seer/road_model.hpp"
#include "seer/vehicle.hpp"

namespace seer {

// One vehicle to draw, with optional prediction annotation.
struct SvgVehicle {
  int id = 0;
  VehicleState state;
  std::optional<int> prediction;
};

// Static top-down snapshot: lanes, vehicles, projected paths, flagged risk
// cells. The view window covers [s_min, s_max] along the road.
void write_svg_frame(const std::string& path, const RoadModel& road,
                     const std::vector<SvgVehicle>& vehicles, const std::vector<Path>& paths,
                     const std::vector<RiskFlag>& flags, double s_min, double s_max,
                     double cell_length = 5.0, const std::string& caption = "");

}  // namespace seer
