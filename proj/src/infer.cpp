#include "seer/infer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "seer/errors.hpp"

namespace seer {

int vote(const std::vector<int>& per_step_predictions) {
  if (per_step_predictions.empty()) throw ContractError("vote on empty prediction window");
  std::map<int, int> counts;
  for (int p : per_step_predictions) ++counts[p];
  int best = 0;
  for (const auto& [cls, n] : counts) best = std::max(best, n);
  // Tie break: the most recent step whose class is among the tied leaders.
  for (auto it = per_step_predictions.rbegin(); it != per_step_predictions.rend(); ++it) {
    if (counts[*it] == best) return *it;
  }
  return per_step_predictions.back();  // unreachable
}

ProjectedPath project_path(int intention, const VehicleState& state, const RoadModel& road,
                           const PlannerConfig& cfg, double horizon_s) {
  if (intention < 0 || intention >= kNumTrainableClasses) {
    throw DataError("projected intention " + std::to_string(intention) + " out of range");
  }
  PlannerConfig pc = cfg;
  pc.horizon = std::max(state.v_lon * horizon_s, 2.0 * pc.spacing);

  ProjectedPath out;
  try {
    out.path = plan_path(static_cast<Intention>(intention), state, road, {}, pc);
  } catch (const InfeasibleIntentionError&) {
    out.path = plan_path(Intention::kLaneKeep, state, road, {}, pc);
    out.fallback = true;
  }
  return out;
}

std::vector<RiskFlag> detect_conflicts(const std::vector<AgentProjection>& projections,
                                       const RoadModel& road, const ConflictConfig& cfg) {
  struct Interval {
    int agent;
    double t0, t1;
  };
  std::map<RiskCell, std::vector<Interval>> occupancy;

  for (const auto& proj : projections) {
    if (proj.path.points.size() < 2) continue;
    const double speed = std::max(proj.speed, 0.1);  // near-parked agents crawl

    // Contiguous runs of waypoints in one cell become one padded interval.
    std::optional<RiskCell> run_cell;
    double run_t0 = 0.0, run_t1 = 0.0;
    auto flush = [&] {
      if (run_cell) {
        occupancy[*run_cell].push_back({proj.agent_id, run_t0 - cfg.pad, run_t1 + cfg.pad});
        run_cell.reset();
      }
    };

    for (size_t i = 0; i < proj.path.points.size(); ++i) {
      const auto& wp = proj.path.points[i];
      LaneFrame lf;
      try {
        lf = to_lane_frame(road, wp.x, wp.y, 0.0);
      } catch (const OutOfBoundsError&) {
        flush();
        continue;
      }
      RiskCell cell{lf.lane_index, static_cast<int>(std::floor(lf.s / cfg.cell_length))};
      const double t = static_cast<double>(i) * proj.path.spacing / speed;
      if (run_cell && cell == *run_cell) {
        run_t1 = t;
      } else {
        flush();
        run_cell = cell;
        run_t0 = run_t1 = t;
      }
    }
    flush();
  }

  std::vector<RiskFlag> flags;
  for (const auto& [cell, intervals] : occupancy) {
    for (size_t i = 0; i < intervals.size(); ++i) {
      for (size_t j = i + 1; j < intervals.size(); ++j) {
        const auto& a = intervals[i];
        const auto& b = intervals[j];
        if (a.agent == b.agent) continue;
        if (a.t0 <= b.t1 && b.t0 <= a.t1) {
          RiskFlag f;
          f.cell = cell;
          f.agent_a = std::min(a.agent, b.agent);
          f.agent_b = std::max(a.agent, b.agent);
          f.t_begin = std::max(a.t0, b.t0);
          f.t_end = std::min(a.t1, b.t1);
          flags.push_back(f);
        }
      }
    }
  }
  std::sort(flags.begin(), flags.end(), [](const RiskFlag& a, const RiskFlag& b) {
    if (a.cell != b.cell) return a.cell < b.cell;
    if (a.agent_a != b.agent_a) return a.agent_a < b.agent_a;
    return a.agent_b < b.agent_b;
  });
  return flags;
}

BatchPredictor model_predictor(const RnnModel& model) {
  return [model](const std::vector<std::vector<Vec>>& batch) {
    return predict_batch(model, batch);
  };
}

InferenceEngine::InferenceEngine(BatchPredictor predictor, int seq_len, int input_dim,
                                 const RoadModel& road, PlannerConfig planner_cfg,
                                 ConflictConfig conflict_cfg)
    : predictor_(std::move(predictor)),
      seq_len_(seq_len),
      input_dim_(input_dim),
      road_(road),
      planner_cfg_(planner_cfg),
      conflict_cfg_(conflict_cfg) {
  if (seq_len_ < 1) throw ConfigError("inference seq_len must be >= 1");
  if (input_dim_ < 2 || input_dim_ > 3) throw ConfigError("inference input_dim must be 2 or 3");
}

TickResult InferenceEngine::tick(const std::vector<SimFrame>& frames) {
  const auto t_start = std::chrono::steady_clock::now();

  TickResult result;
  for (const auto& frame : frames) {
    result.tick = frame.tick;
    result.t_ms = frame.t_ms;
    auto& win = windows_[frame.agent_id];
    if (win.session != frame.session) {
      win.session = frame.session;
      win.features.clear();
    }
    const FeatureVector fv = extract_features(
        frame.state, road_, input_dim_ == 2 ? FeatureVariant::kA2 : FeatureVariant::kA3);
    Vec x(input_dim_);
    for (int k = 0; k < input_dim_; ++k) x[k] = fv.v[k];
    win.features.push_back(std::move(x));
    while (static_cast<int>(win.features.size()) > seq_len_) win.features.pop_front();
    win.last_state = frame.state;
  }

  // Batch-forward every full window; s is re-based per window, matching the
  // recorded training sequences.
  std::vector<int> ready_agents;
  std::vector<std::vector<Vec>> batch;
  for (const auto& frame : frames) {
    const auto& win = windows_[frame.agent_id];
    if (static_cast<int>(win.features.size()) == seq_len_) {
      ready_agents.push_back(frame.agent_id);
      std::vector<Vec> window(win.features.begin(), win.features.end());
      rebase_window_s(window);
      batch.push_back(std::move(window));
    } else {
      AgentTickOutput out;
      out.agent_id = frame.agent_id;
      result.agents.push_back(out);  // warm-up: no vote yet
    }
  }

  std::vector<AgentProjection> projections;
  if (!batch.empty()) {
    const auto preds = predictor_(batch);
    for (size_t i = 0; i < ready_agents.size(); ++i) {
      AgentTickOutput out;
      out.agent_id = ready_agents[i];
      out.per_step = preds[i];
      out.voted = vote(preds[i]);

      const auto& win = windows_[out.agent_id];
      ProjectedPath proj = project_path(*out.voted, win.last_state, road_, planner_cfg_);
      out.projection_fallback = proj.fallback;
      projections.push_back({out.agent_id, std::move(proj.path), win.last_state.v_lon});
      result.agents.push_back(std::move(out));
    }
  }

  if (projections.size() >= 2) {
    result.flags = detect_conflicts(projections, road_, conflict_cfg_);
  }

  std::sort(result.agents.begin(), result.agents.end(),
            [](const AgentTickOutput& a, const AgentTickOutput& b) { return a.agent_id < b.agent_id; });

  result.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

}  // namespace seer
