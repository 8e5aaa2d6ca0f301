#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "seer/dataset.hpp"
#include "seer/planner.hpp"
#include "seer/rnn.hpp"
#include "seer/road_model.hpp"

namespace seer {

// Modal class of the per-step predictions; ties resolved by the class of the
// most recent timestep among the tied classes. Throws ContractError on empty
// input.
int vote(const std::vector<int>& per_step_predictions);

struct ProjectedPath {
  Path path;
  bool fallback = false;  // infeasible maneuver replaced by a lane-keep path
};

// Path implied by a predicted intention from the current state; horizon is
// horizon_s of travel at the current speed.
ProjectedPath project_path(int intention, const VehicleState& state, const RoadModel& road,
                           const PlannerConfig& cfg = {}, double horizon_s = 3.0);

struct RiskCell {
  int lane = 0;
  int bucket = 0;  // floor(s / cell_length)

  auto operator<=>(const RiskCell&) const = default;
};

// Two agents whose projected occupancy of one cell overlaps in time.
struct RiskFlag {
  RiskCell cell;
  int agent_a = 0;  // agent_a < agent_b
  int agent_b = 0;
  double t_begin = 0.0;  // overlap window, seconds from now
  double t_end = 0.0;

  bool operator==(const RiskFlag&) const = default;
};

struct ConflictConfig {
  double cell_length = 5.0;  // m, longitudinal bucket size
  double pad = 0.5;          // s, occupancy interval padding on each side
};

struct AgentProjection {
  int agent_id = 0;
  Path path;
  double speed = 0.0;  // m/s along the path
};

// Discretized conflict detection: flags every (cell, agent pair) whose padded
// occupancy intervals intersect. Output is sorted by (cell, pair) and
// invariant under input reordering.
std::vector<RiskFlag> detect_conflicts(const std::vector<AgentProjection>& projections,
                                       const RoadModel& road, const ConflictConfig& cfg = {});

// Per-step class predictions for a batch of feature windows.
using BatchPredictor =
    std::function<std::vector<std::vector<int>>(const std::vector<std::vector<Vec>>&)>;

BatchPredictor model_predictor(const RnnModel& model);

struct AgentTickOutput {
  int agent_id = 0;
  std::optional<int> voted;        // absent until the window holds T frames
  std::vector<int> per_step;       // empty until the window is full
  bool projection_fallback = false;
};

struct TickResult {
  uint64_t tick = 0;
  uint64_t t_ms = 0;
  std::vector<AgentTickOutput> agents;
  std::vector<RiskFlag> flags;
  double latency_ms = 0.0;  // wall time of this inference pass
};

// Sliding-window (stride 1) inference over live frames: per tick ingest one
// frame per agent, batch-predict full windows, vote, project paths and flag
// conflicts. Owns all windows; the predictor snapshot is read-only.
class InferenceEngine {
 public:
  InferenceEngine(BatchPredictor predictor, int seq_len, int input_dim, const RoadModel& road,
                  PlannerConfig planner_cfg = {}, ConflictConfig conflict_cfg = {});

  TickResult tick(const std::vector<SimFrame>& frames);

 private:
  struct Window {
    int session = -1;
    std::deque<Vec> features;
    VehicleState last_state;
  };

  BatchPredictor predictor_;
  int seq_len_;
  int input_dim_;
  RoadModel road_;
  PlannerConfig planner_cfg_;
  ConflictConfig conflict_cfg_;
  std::map<int, Window> windows_;
};

}  // namespace seer
