#include "seer/svg.hpp"

#include <cmath>
#include <fstream>

#include "seer/errors.hpp"

namespace seer {

namespace {

const char* prediction_color(std::optional<int> prediction) {
  if (!prediction) return "#9e9e9e";
  switch (*prediction) {
    case 0: return "#4caf50";  // lane keep
    case 1: return "#ff9800";  // change right
    case 2: return "#03a9f4";  // change left
    case 3: return "#e91e63";  // decelerate
    case 4: return "#8bc34a";  // accelerate
  }
  return "#9e9e9e";
}

}  // namespace

void write_svg_frame(const std::string& path, const RoadModel& road,
                     const std::vector<SvgVehicle>& vehicles, const std::vector<Path>& paths,
                     const std::vector<RiskFlag>& flags, double s_min, double s_max,
                     double cell_length, const std::string& caption) {
  if (!(s_max > s_min)) throw ConfigError("svg window must have s_max > s_min");
  const double scale = 8.0;  // px per meter
  const double margin = 24.0;
  const double w = (s_max - s_min) * scale + 2 * margin;
  const double h = road.width() * scale + 2 * margin;

  auto px = [&](double x) { return (x - s_min) * scale + margin; };
  auto py = [&](double y) { return (road.width() - y) * scale + margin; };

  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");

  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
  out << "<rect width='100%' height='100%' fill='#1b1b1b'/>\n";
  out << "<rect x='" << px(s_min) << "' y='" << py(road.width()) << "' width='"
      << (s_max - s_min) * scale << "' height='" << road.width() * scale
      << "' fill='#333333'/>\n";

  // Lane markers: solid edges, dashed interior boundaries.
  for (int k = 0; k <= road.num_lanes(); ++k) {
    const double y = k * road.lane_width;
    const bool edge = k == 0 || k == road.num_lanes();
    out << "<line x1='" << px(s_min) << "' y1='" << py(y) << "' x2='" << px(s_max) << "' y2='"
        << py(y) << "' stroke='" << (edge ? "#f5f5f5" : "#bdbdbd") << "' stroke-width='2'"
        << (edge ? "" : " stroke-dasharray='18 14'") << "/>\n";
  }

  // Risk cells under everything else that moves.
  for (const auto& f : flags) {
    const double x0 = f.cell.bucket * cell_length;
    const double y0 = f.cell.lane * road.lane_width;
    out << "<rect x='" << px(x0) << "' y='" << py(y0 + road.lane_width) << "' width='"
        << cell_length * scale << "' height='" << road.lane_width * scale
        << "' fill='#ffeb3b' fill-opacity='0.45' stroke='#fbc02d'/>\n";
  }

  for (const auto& p : paths) {
    if (p.points.size() < 2) continue;
    out << "<polyline fill='none' stroke='#2196f3' stroke-width='2' stroke-dasharray='2 6' "
           "points='";
    for (const auto& wp : p.points) out << px(wp.x) << "," << py(wp.y) << " ";
    out << "'/>\n";
  }

  for (const auto& v : vehicles) {
    const double deg = -v.state.heading * 180.0 / M_PI;
    out << "<g transform='translate(" << px(v.state.x) << "," << py(v.state.y) << ") rotate("
        << deg << ")'>\n";
    out << "<rect x='" << -2.25 * scale << "' y='" << -1.0 * scale << "' width='" << 4.5 * scale
        << "' height='" << 2.0 * scale << "' rx='4' fill='" << prediction_color(v.prediction)
        << "' stroke='#111111'/>\n";
    out << "</g>\n";
    out << "<text x='" << px(v.state.x) << "' y='" << py(v.state.y) - 12
        << "' fill='#fafafa' font-size='12' text-anchor='middle'>" << v.id << "</text>\n";
  }

  if (!caption.empty()) {
    out << "<text x='" << margin << "' y='" << h - 8 << "' fill='#fafafa' font-size='13'>"
        << caption << "</text>\n";
  }
  out << "</svg>\n";
  if (!out.good()) throw FormatError("write failed on '" + path + "'");
}

}  // namespace seer
