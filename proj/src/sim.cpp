#include "seer/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "seer/errors.hpp"

namespace seer {

Simulation::Simulation(const SimConfig& cfg) : cfg_(cfg) {
  cfg_.physics.validate();
  if (cfg_.num_agents < 1) throw ConfigError("num_agents must be >= 1");
  if (!(cfg_.dt > 0.0 && cfg_.dt <= 0.1)) throw ConfigError("sim dt must be in (0, 0.1]");
  if (cfg_.log_every < 1) throw ConfigError("log_every must be >= 1");

  std::vector<VehicleState> spawned;
  if (!cfg_.initial_states.empty()) {
    spawned = cfg_.initial_states;
    cfg_.num_agents = static_cast<int>(spawned.size());
  } else {
    spawned = spawn_traffic(cfg_.road, cfg_.num_agents, cfg_.seed, cfg_.spawn);
  }
  agents_.reserve(spawned.size());
  for (size_t i = 0; i < spawned.size(); ++i) {
    Agent a{spawned[i], ScenarioPolicy(cfg_.seed, static_cast<int>(i), cfg_.policy),
            PidState{}, Path{}, Intention::kLaneKeep, -1.0e9, 0, std::nullopt, 0.0, {}};
    agents_.push_back(std::move(a));
  }
}

SignalState Simulation::signal() const {
  return cfg_.policy.urban ? signal_at(time(), cfg_.policy) : SignalState::kGreen;
}

std::vector<VehicleState> Simulation::snapshot() const {
  std::vector<VehicleState> out;
  out.reserve(agents_.size());
  for (const auto& a : agents_) out.push_back(a.state);
  return out;
}

Intention Simulation::agent_intention(int agent) const {
  return agents_.at(static_cast<size_t>(agent)).active;
}

int Simulation::agent_session(int agent) const {
  return agents_.at(static_cast<size_t>(agent)).session;
}

void Simulation::force_intention(int agent, Intention intention) {
  agents_.at(static_cast<size_t>(agent)).policy.force(intention);
}

void Simulation::schedule_intention(int agent, double t, Intention intention) {
  agents_.at(static_cast<size_t>(agent)).scheduled.emplace_back(t, intention);
}

void Simulation::apply_external_controls(int agent, const Controls& controls, double hold_s) {
  auto& a = agents_.at(static_cast<size_t>(agent));
  a.external = controls;
  a.external_until = time() + hold_s;
}

void Simulation::reseed(uint64_t seed) {
  cfg_.seed = seed;
  for (auto& a : agents_) a.policy.reseed(seed);
}

void Simulation::maybe_wrap(Agent& agent, int index) {
  if (agent.state.x <= cfg_.road.road_length - cfg_.wrap_margin) return;
  const double shift = cfg_.road.road_length - 2.0 * cfg_.wrap_margin;
  agent.state.x -= shift;

  // Avoid landing on top of a same-lane neighbour.
  for (int guard = 0; guard < 64; ++guard) {
    bool blocked = false;
    for (size_t j = 0; j < agents_.size(); ++j) {
      if (static_cast<int>(j) == index) continue;
      const auto& other = agents_[j].state;
      if (std::abs(other.y - agent.state.y) < cfg_.road.lane_width / 2.0 &&
          std::abs(other.x - agent.state.x) < cfg_.spawn.min_gap) {
        blocked = true;
        break;
      }
    }
    if (!blocked || agent.state.x < cfg_.spawn.margin) break;
    agent.state.x -= cfg_.spawn.min_gap;
  }
  if (agent.state.x < cfg_.spawn.margin) agent.state.x = cfg_.spawn.margin;

  ++agent.session;
  agent.pid = PidState{};
  agent.last_plan_t = -1.0e9;
  agent.path.points.clear();  // stale waypoints are meaningless after a teleport
}

std::vector<SimFrame> Simulation::tick() {
  const double t = time();
  const SignalState light = signal();
  const std::vector<VehicleState> snap = snapshot();

  for (size_t i = 0; i < agents_.size(); ++i) {
    Agent& agent = agents_[i];

    std::vector<VehicleState> traffic;
    traffic.reserve(snap.size() - 1);
    for (size_t j = 0; j < snap.size(); ++j) {
      if (j != i) traffic.push_back(snap[j]);
    }

    for (auto it = agent.scheduled.begin(); it != agent.scheduled.end();) {
      if (it->first <= t) {
        agent.policy.force(it->second);
        it = agent.scheduled.erase(it);
      } else {
        ++it;
      }
    }

    const Intention intention =
        agent.policy.update(agent.state, cfg_.road, traffic, light, t, cfg_.planner);

    const bool is_change = intention == Intention::kChangeLaneLeft ||
                           intention == Intention::kChangeLaneRight;
    const bool tracks_traffic =
        intention == Intention::kCarFollow || intention == Intention::kStop;
    bool replan = intention != agent.active || agent.path.points.empty();
    if (!replan && !is_change) {
      const double interval = tracks_traffic ? 0.2 : cfg_.replan_interval;
      replan = t - agent.last_plan_t >= interval;
    }

    if (replan) {
      std::optional<double> stop_line;
      if (cfg_.policy.urban) stop_line = cfg_.policy.stop_line_s;
      try {
        agent.path = plan_path(intention, agent.state, cfg_.road, traffic, cfg_.planner, stop_line);
        agent.active = intention;
      } catch (const InfeasibleIntentionError&) {
        agent.path =
            plan_path(Intention::kLaneKeep, agent.state, cfg_.road, traffic, cfg_.planner);
        agent.active = Intention::kLaneKeep;
      }
      agent.last_plan_t = t;
    }

    Controls controls;
    if (agent.external && t < agent.external_until) {
      controls = *agent.external;
    } else {
      PidOutput out =
          pid_control(agent.path, agent.state, cfg_.gains, agent.pid, cfg_.dt, cfg_.speed_control);
      agent.pid = out.state;
      controls = out.controls;
      controls.signal_left = agent.active == Intention::kChangeLaneLeft;
      controls.signal_right = agent.active == Intention::kChangeLaneRight;
    }

    agent.state = step(agent.state, controls, cfg_.physics, cfg_.dt, &clamp_log_);

    // Keep runaway states inside the corridor; counted, not silent.
    const double y_max = cfg_.road.width() - 0.05;
    if (agent.state.y < 0.05 || agent.state.y > y_max) {
      agent.state.y = std::clamp(agent.state.y, 0.05, y_max);
      agent.state.heading = wrap_angle(agent.state.heading * 0.5);
      ++off_road_clamps_;
    }
    maybe_wrap(agent, static_cast<int>(i));
  }

  ++ticks_;

  std::vector<SimFrame> frames;
  if (ticks_ % static_cast<uint64_t>(cfg_.log_every) == 0) {
    frames.reserve(agents_.size());
    const uint64_t t_ms = static_cast<uint64_t>(std::llround(time() * 1000.0));
    for (size_t i = 0; i < agents_.size(); ++i) {
      SimFrame f;
      f.agent_id = static_cast<int>(i);
      f.session = agents_[i].session;
      f.tick = ticks_;
      f.t_ms = t_ms;
      f.state = agents_[i].state;
      f.raw_label = agents_[i].active;
      frames.push_back(f);
    }
  }
  return frames;
}

SimConfig desk_dataset_sim_config() {
  SimConfig sc;
  sc.road = RoadModel{3, 0, 6.5, 200.0};
  sc.wrap_margin = 40.0;
  sc.num_agents = 6;
  sc.spawn.speed_min = 7.3;
  sc.spawn.speed_max = 7.8;
  sc.spawn.min_gap = 40.0;
  sc.spawn.gap_jitter = 40.0;
  sc.planner.speed_ramp_accel = 3.2;
  sc.policy.maneuver_duration = 3.0;
  sc.policy.mean_dwell = 13.0;
  sc.policy.min_dwell = 3.0;
  // draw weights are relative; the dwell sets the overall maneuver rate
  sc.policy.w_change_left = 0.37;
  sc.policy.w_change_right = 0.37;
  sc.policy.w_accel = 0.03;
  sc.policy.w_decel = 0.03;
  sc.policy.w_follow = 0.10;
  return sc;
}

DatasetManifest generate_dataset(const GenerateConfig& cfg, const std::string& out_path) {
  if (cfg.num_sequences < 1) throw ConfigError("num_sequences must be >= 1");
  GenerateConfig g = cfg;
  g.sim.policy.urban = cfg.scene == "urban";
  if (cfg.scene != "highway" && cfg.scene != "urban") {
    throw ConfigError("scene must be 'highway' or 'urban', got '" + cfg.scene + "'");
  }

  Simulation sim(g.sim);

  DatasetManifest manifest;
  manifest.variant = g.variant;
  manifest.seq_len = g.seq_len;
  manifest.frame_period_ms = g.sim.log_every * static_cast<int>(g.sim.dt * 1000.0);
  manifest.seed = g.sim.seed;
  manifest.scene = g.scene;
  manifest.split = g.split;
  manifest.config_hash = g.config_hash;

  SequenceAssembler assembler(g.seq_len, g.variant, g.sim.road,
                              g.scene == "urban" ? uint8_t{1} : uint8_t{0});
  DatasetWriter writer(out_path, manifest);
  BoundedQueue<SimFrame> fifo(g.fifo_capacity);
  std::atomic<bool> reached{false};

  uint64_t written = 0;
  std::exception_ptr consumer_error;
  std::thread consumer([&] {
    try {
      written = record_stream(fifo, assembler, writer, g.num_sequences, &reached);
    } catch (...) {
      consumer_error = std::current_exception();
      reached.store(true);
      SimFrame drop;
      while (fifo.pop(drop)) {
      }
    }
  });

  // Enough sim time for the requested sequence count plus generous slack.
  const double frame_period_s = manifest.frame_period_ms / 1000.0;
  const double needed =
      static_cast<double>(g.num_sequences) * g.seq_len * frame_period_s / g.sim.num_agents;
  const double bound = g.max_sim_seconds > 0.0 ? g.max_sim_seconds : needed * 4.0 + 120.0;

  try {
    while (!reached.load() && sim.time() < bound) {
      for (auto& frame : sim.tick()) fifo.push(std::move(frame));
    }
  } catch (...) {
    fifo.close();
    consumer.join();
    throw;
  }
  fifo.close();
  consumer.join();
  if (consumer_error) std::rethrow_exception(consumer_error);

  if (written < g.num_sequences) {
    throw DataError("generation produced only " + std::to_string(written) + " of " +
                    std::to_string(g.num_sequences) + " sequences within the time bound");
  }
  writer.finalize();
  return read_dataset(out_path).manifest;
}

}  // namespace seer
