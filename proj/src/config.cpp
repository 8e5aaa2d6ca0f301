#include "seer/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "seer/crc32.hpp"
#include "seer/errors.hpp"

namespace seer {

namespace {

using nlohmann::json;

}  // namespace

void ScenarioConfig::validate() const {
  if (scene != "highway" && scene != "urban") {
    throw ConfigError("scene must be 'highway' or 'urban', got '" + scene + "'");
  }
  if (num_lane_right < 1) throw ConfigError("num_lane_right must be >= 1");
  if (num_lane_left < 0) throw ConfigError("num_lane_left must be >= 0");
  if (!(lane_width > 0.0)) throw ConfigError("lane_width must be positive");
  if (!(road_length > 0.0)) throw ConfigError("road_length must be positive");
  if (num_agents < 1) throw ConfigError("num_agents must be >= 1");
  if (log_frequency < 1) throw ConfigError("log_frequency must be >= 1");
  if (seq_len != 6 && seq_len != 12) throw ConfigError("seq_len must be 6 or 12");
  if (num_sequences < 1) throw ConfigError("num_sequences must be >= 1");
  if (test_fraction < 0.0 || test_fraction >= 1.0) {
    throw ConfigError("test_fraction must be in [0, 1)");
  }
  if (log_port < 0 || log_port > 65535 || control_port < 0 || control_port > 65535) {
    throw ConfigError("ports must be in [0, 65535]");
  }
  feature_variant_from_name(features);
  cell_kind_from_name(cell);
  to_sim_config().physics.validate();
  to_rnn_config().validate();
}

std::string ScenarioConfig::to_json_string() const {
  json j;
  j["scene"] = scene;
  j["num_lane_right"] = num_lane_right;
  j["num_lane_left"] = num_lane_left;
  j["lane_width"] = lane_width;
  j["road_length"] = road_length;
  j["num_agents"] = num_agents;
  j["seed"] = seed;
  j["traction"] = traction;
  j["forward_slip_limit"] = forward_slip_limit;
  j["sideway_slip_limit"] = sideway_slip_limit;
  j["engine_torque"] = engine_torque;
  j["brake_torque"] = brake_torque;
  j["braking_force"] = braking_force;
  j["mass"] = mass;
  j["max_speed"] = max_speed;
  j["log_frequency"] = log_frequency;
  j["features"] = features;
  j["seq_len"] = seq_len;
  j["num_sequences"] = num_sequences;
  j["test_fraction"] = test_fraction;
  j["cell"] = cell;
  j["hidden_dim"] = hidden_dim;
  j["embed_dim"] = embed_dim;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["learning_rate"] = learning_rate;
  j["drop_stop"] = drop_stop;
  j["kp"] = kp;
  j["ki"] = ki;
  j["kd"] = kd;
  j["lane_change_distance"] = lane_change_distance;
  j["log_port"] = log_port;
  j["control_port"] = control_port;
  j["batchmode"] = batchmode;
  return j.dump(2);
}

ScenarioConfig ScenarioConfig::from_json_string(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("config file is not valid JSON");

  static const std::set<std::string> known = {
      "scene",          "num_lane_right", "num_lane_left",     "lane_width",
      "road_length",    "num_agents",     "seed",              "traction",
      "forward_slip_limit", "sideway_slip_limit", "engine_torque", "brake_torque",
      "braking_force",  "mass",           "max_speed",         "log_frequency",
      "features",       "seq_len",        "num_sequences",     "test_fraction",
      "cell",           "hidden_dim",     "embed_dim",         "epochs",
      "batch_size",     "learning_rate",  "drop_stop",         "kp",
      "ki",             "kd",             "lane_change_distance", "log_port",
      "control_port",   "batchmode"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!known.contains(key)) throw ConfigError("unknown config field '" + key + "'");
  }

  ScenarioConfig c;
  try {
    auto get = [&j](const char* key, auto& out) {
      if (j.contains(key)) out = j.at(key).get<std::decay_t<decltype(out)>>();
    };
    get("scene", c.scene);
    get("num_lane_right", c.num_lane_right);
    get("num_lane_left", c.num_lane_left);
    get("lane_width", c.lane_width);
    get("road_length", c.road_length);
    get("num_agents", c.num_agents);
    get("seed", c.seed);
    get("traction", c.traction);
    get("forward_slip_limit", c.forward_slip_limit);
    get("sideway_slip_limit", c.sideway_slip_limit);
    get("engine_torque", c.engine_torque);
    get("brake_torque", c.brake_torque);
    get("braking_force", c.braking_force);
    get("mass", c.mass);
    get("max_speed", c.max_speed);
    get("log_frequency", c.log_frequency);
    get("features", c.features);
    get("seq_len", c.seq_len);
    get("num_sequences", c.num_sequences);
    get("test_fraction", c.test_fraction);
    get("cell", c.cell);
    get("hidden_dim", c.hidden_dim);
    get("embed_dim", c.embed_dim);
    get("epochs", c.epochs);
    get("batch_size", c.batch_size);
    get("learning_rate", c.learning_rate);
    get("drop_stop", c.drop_stop);
    get("kp", c.kp);
    get("ki", c.ki);
    get("kd", c.kd);
    get("lane_change_distance", c.lane_change_distance);
    get("log_port", c.log_port);
    get("control_port", c.control_port);
    get("batchmode", c.batchmode);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return c;
}

ScenarioConfig ScenarioConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_string(ss.str());
}

SimConfig ScenarioConfig::to_sim_config() const {
  SimConfig sc;
  sc.road = RoadModel{num_lane_right, num_lane_left, lane_width, road_length};
  sc.physics.engine_torque = engine_torque;
  sc.physics.brake_torque = brake_torque;
  sc.physics.braking_force = braking_force;
  sc.physics.mass = mass;
  sc.physics.forward_slip_limit = forward_slip_limit;
  sc.physics.sideway_slip_limit = sideway_slip_limit;
  sc.physics.traction = traction;
  sc.physics.max_speed = max_speed;
  sc.planner.lane_change_distance = lane_change_distance;
  sc.gains.kp = kp;
  sc.gains.ki = ki;
  sc.gains.kd = kd;
  sc.policy.urban = scene == "urban";
  sc.num_agents = num_agents;
  sc.seed = seed;
  sc.log_every = log_frequency;
  return sc;
}

RnnConfig ScenarioConfig::to_rnn_config() const {
  RnnConfig rc;
  rc.cell = cell_kind_from_name(cell);
  rc.input_dim = feature_dim(feature_variant());
  rc.embed_dim = embed_dim;
  rc.hidden_dim = hidden_dim;
  rc.seq_len = seq_len;
  rc.learning_rate = learning_rate;
  rc.batch_size = batch_size;
  rc.epochs = epochs;
  rc.seed = seed;
  return rc;
}

std::string ScenarioConfig::hash() const {
  const std::string text = to_json_string();
  const uint32_t h = crc32(text.data(), text.size());
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08x", h);
  return buf;
}

}  // namespace seer
