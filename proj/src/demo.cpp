#include "seer/demo.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "seer/errors.hpp"
#include "seer/infer.hpp"
#include "seer/svg.hpp"

namespace seer {

namespace {

using nlohmann::json;

// Quiet policy: no spontaneous maneuvers or speed recovery, only scripted
// ones (the stop guard stays armed).
PolicyConfig scripted_policy() {
  PolicyConfig p;
  p.mean_dwell = 1.0e9;
  p.min_dwell = 1.0e9;
  p.cruise_deficit = 1.0e9;
  p.w_change_left = p.w_change_right = p.w_accel = p.w_decel = p.w_follow = 0.0;
  return p;
}

}  // namespace

DemoResult run_demo(const RnnModel& model, const DemoConfig& cfg) {
  if (cfg.scenario != "lane_change" && cfg.scenario != "conflict") {
    throw ConfigError("unknown demo scenario '" + cfg.scenario + "'");
  }

  // The scene matches the recording setup (road length feeds the feature
  // normalization, speeds sit in the trained cruise band).
  SimConfig sc;
  sc.road = RoadModel{3, 0, 6.5, 200.0};
  sc.wrap_margin = 30.0;
  sc.physics = cfg.physics;
  sc.planner = cfg.planner;
  sc.policy = scripted_policy();
  sc.gains = cfg.gains;
  sc.seed = cfg.seed;

  const Intention maneuver = Intention::kChangeLaneLeft;
  const int ego = 0;
  if (cfg.scenario == "lane_change") {
    VehicleState a;
    a.x = 20.0;
    a.y = sc.road.lane_center(0);
    a.v_lon = 7.5;
    VehicleState b;  // parked far ahead in the outer lane, out of the way
    b.x = 150.0;
    b.y = sc.road.lane_center(2);
    b.v_lon = 0.0;
    sc.initial_states = {a, b};
  } else {
    // the merge target: slightly slower traffic in the adjacent lane
    VehicleState a;
    a.x = 30.0;
    a.y = sc.road.lane_center(0);
    a.v_lon = 7.5;
    VehicleState b;
    b.x = 44.0;
    b.y = sc.road.lane_center(1);
    b.v_lon = 6.5;
    sc.initial_states = {a, b};
  }

  Simulation sim(sc);
  sim.schedule_intention(ego, cfg.onset_t, maneuver);

  InferenceEngine engine(model_predictor(model), model.config.seq_len, model.config.input_dim,
                         sc.road, cfg.planner);

  std::ofstream log;
  if (!cfg.log_path.empty()) {
    log.open(cfg.log_path, std::ios::trunc);
    if (!log) throw FormatError("cannot open '" + cfg.log_path + "' for writing");
  }
  if (!cfg.svg_dir.empty() && cfg.svg_count > 0) {
    std::filesystem::create_directories(cfg.svg_dir);
  }

  DemoResult result;
  const int total_ticks = static_cast<int>(cfg.duration_s / sc.dt);
  const int total_readouts = total_ticks / sc.log_every;
  const int svg_stride =
      cfg.svg_count > 0 ? std::max(1, total_readouts / cfg.svg_count) : 0;

  double latency_sum = 0.0;
  int latency_n = 0;
  int readout = 0;
  const uint8_t target = static_cast<uint8_t>(maneuver);

  for (int t = 0; t < total_ticks; ++t) {
    const auto frames = sim.tick();
    if (frames.empty()) continue;

    const TickResult tick = engine.tick(frames);
    latency_sum += tick.latency_ms;
    ++latency_n;

    const auto& ego_frame = frames[ego];
    const uint8_t truth = static_cast<uint8_t>(ego_frame.raw_label);
    if (truth == target && result.onset_tick < 0) {
      result.onset_tick = readout;
      result.maneuver_start_t = ego_frame.t_ms / 1000.0;
    }
    if (result.onset_tick >= 0 && result.maneuver_end_t < 0 && truth != target &&
        result.maneuver_start_t >= 0) {
      result.maneuver_end_t = ego_frame.t_ms / 1000.0;
    }
    for (const auto& agent : tick.agents) {
      if (agent.agent_id == ego && agent.voted && *agent.voted == static_cast<int>(target) &&
          result.vote_transition_tick < 0) {
        result.vote_transition_tick = readout;
      }
    }
    result.risk_flag_count += tick.flags.size();
    if (!tick.flags.empty()) ++result.risk_ticks;

    if (log.is_open()) {
      json line;
      line["tick"] = tick.tick;
      line["t_ms"] = tick.t_ms;
      json agents = json::array();
      for (const auto& agent : tick.agents) {
        json ja;
        ja["id"] = agent.agent_id;
        ja["truth"] = static_cast<int>(frames[agent.agent_id].raw_label);
        if (agent.voted) {
          ja["voted"] = *agent.voted;
          ja["per_step"] = agent.per_step;
          ja["fallback"] = agent.projection_fallback;
        }
        agents.push_back(std::move(ja));
      }
      line["agents"] = std::move(agents);
      json flags = json::array();
      for (const auto& f : tick.flags) {
        flags.push_back({{"lane", f.cell.lane},
                         {"bucket", f.cell.bucket},
                         {"agents", {f.agent_a, f.agent_b}},
                         {"t_begin", f.t_begin},
                         {"t_end", f.t_end}});
      }
      line["flags"] = std::move(flags);
      line["latency_ms"] = tick.latency_ms;
      log << line.dump() << "\n";
    }

    if (svg_stride > 0 && readout % svg_stride == 0 && result.svg_written < cfg.svg_count) {
      std::vector<SvgVehicle> vehicles;
      std::vector<Path> paths;
      double mean_x = 0.0;
      for (const auto& f : frames) mean_x += f.state.x;
      mean_x /= static_cast<double>(frames.size());
      for (const auto& agent : tick.agents) {
        SvgVehicle v;
        v.id = agent.agent_id;
        v.state = frames[agent.agent_id].state;
        if (agent.voted) {
          v.prediction = agent.voted;
          paths.push_back(
              project_path(*agent.voted, v.state, sc.road, cfg.planner).path);
        }
        vehicles.push_back(std::move(v));
      }
      char name[64];
      std::snprintf(name, sizeof(name), "frame_%04d.svg", result.svg_written);
      char caption[64];
      std::snprintf(caption, sizeof(caption), "t = %.1f s", sim.time());
      write_svg_frame(cfg.svg_dir + "/" + name, sc.road, vehicles, paths, tick.flags,
                      std::max(0.0, mean_x - 80.0),
                      std::min(sc.road.road_length, mean_x + 80.0), 5.0, caption);
      ++result.svg_written;
    }
    ++readout;
  }

  result.readout_ticks = readout;
  result.mean_latency_ms = latency_n > 0 ? latency_sum / latency_n : 0.0;
  return result;
}

}  // namespace seer
