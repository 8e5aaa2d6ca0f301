#include "seer/cli.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "seer/config.hpp"
#include "seer/demo.hpp"
#include "seer/errors.hpp"
#include "seer/eval.hpp"
#include "seer/infer.hpp"
#include "seer/rnn.hpp"
#include "seer/sim.hpp"
#include "seer/stream_io.hpp"

namespace seer::cli {

namespace {

using nlohmann::json;

void add_common_flags(CLI::App* sub, ScenarioConfig& cfg) {
  sub->add_option("--config", "scenario config file (JSON); flags override it")
      ->type_name("FILE");  // handled by the pre-scan, kept for --help
  sub->add_option("--scene", cfg.scene, "highway | urban");
  sub->add_option("--num_lane_right", cfg.num_lane_right, "lanes on the drivable side");
  sub->add_option("--num_lane_left", cfg.num_lane_left, "lanes on the far side");
  sub->add_option("--lane_width", cfg.lane_width, "lane width [m]");
  sub->add_option("--road_length", cfg.road_length, "road length [m]");
  sub->add_option("--num_agents", cfg.num_agents, "vehicles in the scene");
  sub->add_option("--seed", cfg.seed, "run seed");
  sub->add_option("--traction", cfg.traction, "tire traction");
  sub->add_option("--forward_slip_limit", cfg.forward_slip_limit, "forward slip limit");
  sub->add_option("--sideway_slip_limit", cfg.sideway_slip_limit, "side way slip limit");
  sub->add_option("--engine_torque", cfg.engine_torque, "drive force constant");
  sub->add_option("--brake_torque", cfg.brake_torque, "brake torque constant");
  sub->add_option("--braking_force", cfg.braking_force, "braking force [N]");
  sub->add_option("--mass", cfg.mass, "vehicle mass [kg]");
  sub->add_option("--max_speed", cfg.max_speed, "speed cap [m/s]");
  sub->add_option("--log_frequency", cfg.log_frequency, "readout period x 10 ms");
  sub->add_option("--features", cfg.features, "feature variant: a2 | a3");
  sub->add_option("--seq_len", cfg.seq_len, "frames per sequence (6 or 12)");
  sub->add_option("--kp", cfg.kp, "steering P gain");
  sub->add_option("--ki", cfg.ki, "steering I gain");
  sub->add_option("--kd", cfg.kd, "steering D gain");
  sub->add_option("--lane_change_distance", cfg.lane_change_distance,
                  "longitudinal lane-change blend [m]");
  sub->add_flag("--batchmode", cfg.batchmode, "run without wall-clock pacing");
}

std::string sibling_path(const std::string& path, const std::string& suffix) {
  const auto dot = path.rfind('.');
  if (dot == std::string::npos || path.find('/', dot) != std::string::npos) {
    return path + suffix;
  }
  return path.substr(0, dot) + suffix + path.substr(dot);
}

void print_dataset_summary(const std::string& path) {
  const Dataset ds = read_dataset(path);
  std::array<uint64_t, 8> seq_with_label{};
  for (const auto& rec : ds.records) {
    std::array<bool, 8> seen{};
    for (const auto& f : rec.frames) {
      if (f.label < seen.size()) seen[f.label] = true;
    }
    for (size_t k = 0; k < seen.size(); ++k) {
      if (seen[k]) ++seq_with_label[k];
    }
  }
  std::printf("%s: %llu sequences (T=%d, %d ms period, %s features)\n", path.c_str(),
              static_cast<unsigned long long>(ds.manifest.sequence_count), ds.manifest.seq_len,
              ds.manifest.frame_period_ms, feature_variant_name(ds.manifest.variant));
  for (int k = 0; k < 7; ++k) {
    std::printf("  class %d %-18s: %10llu timesteps, %8llu sequences\n", k,
                intention_name(static_cast<Intention>(k)),
                static_cast<unsigned long long>(ds.manifest.label_timestep_counts[k]),
                static_cast<unsigned long long>(seq_with_label[k]));
  }
}

int cmd_generate(const ScenarioConfig& cfg, const std::string& out_path,
                 const std::string& preset) {
  cfg.validate();
  GenerateConfig g;
  if (preset == "desk") {
    // The tuned recording scene used by cross-validation; flags still set the
    // seed, readout rate, and sequence budget.
    g.sim = desk_dataset_sim_config();
    g.sim.seed = cfg.seed;
    g.sim.log_every = cfg.log_frequency;
  } else if (preset.empty()) {
    g.sim = cfg.to_sim_config();
  } else {
    throw ConfigError("unknown preset '" + preset + "' (expected 'desk')");
  }
  g.variant = cfg.feature_variant();
  g.seq_len = cfg.seq_len;
  g.num_sequences = cfg.num_sequences;
  g.scene = cfg.scene;
  g.config_hash = cfg.hash();

  if (cfg.test_fraction > 0.0) {
    const std::string tmp = out_path + ".all";
    generate_dataset(g, tmp);
    Dataset ds = read_dataset(tmp);
    auto [train_recs, test_recs] = split_train_test(ds.records, cfg.test_fraction, cfg.seed);
    DatasetManifest m = ds.manifest;
    m.split = "train";
    write_dataset(sibling_path(out_path, "_train"), m, train_recs);
    m.split = "test";
    write_dataset(sibling_path(out_path, "_test"), m, test_recs);
    std::filesystem::remove(tmp);
    print_dataset_summary(sibling_path(out_path, "_train"));
    print_dataset_summary(sibling_path(out_path, "_test"));
  } else {
    generate_dataset(g, out_path);
    print_dataset_summary(out_path);
  }
  return 0;
}

int cmd_train(const ScenarioConfig& cfg, const std::string& dataset_path,
              const std::string& model_out, const std::string& log_out) {
  Dataset ds = read_dataset(dataset_path);
  RnnConfig rc = cfg.to_rnn_config();
  rc.seq_len = ds.manifest.seq_len;
  if (rc.input_dim > feature_dim(ds.manifest.variant)) {
    throw ConfigError("feature variant mismatch: model wants " + cfg.features + " (" +
                      std::to_string(rc.input_dim) + " features) but dataset '" + dataset_path +
                      "' holds " + feature_variant_name(ds.manifest.variant));
  }

  const auto cleaned = clean(ds.records, cfg.drop_stop);
  std::printf("cleaning: kept %zu of %zu sequences\n", cleaned.size(), ds.records.size());

  const TrainResult tr = train(cleaned, rc);
  save_model(tr.model, model_out);

  std::printf("epoch    loss    per-step accuracy\n");
  for (const auto& e : tr.log) {
    std::printf("%5d  %7.4f    %6.2f%%\n", e.epoch, e.loss, e.accuracy * 100.0);
  }
  std::printf("model written to %s (%zu parameters)\n", model_out.c_str(),
              tr.model.parameter_count());

  if (!log_out.empty()) {
    json jl = json::array();
    for (const auto& e : tr.log) {
      jl.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"accuracy", e.accuracy}});
    }
    std::ofstream out(log_out, std::ios::trunc);
    out << json{{"train_log", jl}}.dump(2) << "\n";
    if (!out.good()) throw FormatError("cannot write '" + log_out + "'");
  }
  return 0;
}

int cmd_eval(const ScenarioConfig& cfg, const std::string& model_path,
             const std::string& dataset_path, const std::string& json_out) {
  const RnnModel model = load_model(model_path);
  Dataset ds = read_dataset(dataset_path);
  if (model.config.input_dim > feature_dim(ds.manifest.variant)) {
    throw ConfigError("feature variant mismatch: model '" + model_path + "' wants " +
                      std::to_string(model.config.input_dim) + " features but dataset '" +
                      dataset_path + "' holds " + feature_variant_name(ds.manifest.variant));
  }
  if (model.config.seq_len != ds.manifest.seq_len) {
    throw ConfigError("sequence length mismatch: model '" + model_path + "' has T=" +
                      std::to_string(model.config.seq_len) + " but dataset '" + dataset_path +
                      "' has T=" + std::to_string(ds.manifest.seq_len));
  }

  const auto cleaned = clean(ds.records, cfg.drop_stop);
  const EvalResult res = evaluate(model, cleaned);

  CvReport report;
  EvalBlock block;
  block.scene = ds.manifest.scene;
  block.cell = model.config.cell;
  block.variant = model.config.input_dim == 2 ? FeatureVariant::kA2 : FeatureVariant::kA3;
  block.seq_len = model.config.seq_len;
  block.result = res;
  report.blocks.push_back(block);
  std::printf("%s", report.to_table().c_str());
  std::printf("-- three-class view --\n");
  for (const auto& m : three_class_view(res)) {
    std::printf("  %d    precision %s   recall %s\n", m.class_index,
                m.precision ? std::to_string(*m.precision * 100.0).c_str() : "--",
                m.recall ? std::to_string(*m.recall * 100.0).c_str() : "--");
  }

  if (!json_out.empty()) {
    std::ofstream out(json_out, std::ios::trunc);
    out << report.to_json_string() << "\n";
    if (!out.good()) throw FormatError("cannot write '" + json_out + "'");
  }
  return 0;
}

int cmd_demo(const ScenarioConfig& cfg, const std::string& model_path, std::string scenario,
             const std::string& log_stem, const std::string& svg_dir, int svg_count) {
  const RnnModel model = load_model(model_path);
  std::vector<std::string> scenarios;
  if (scenario == "all") {
    scenarios = {"lane_change", "conflict"};
  } else {
    scenarios = {scenario};
  }

  for (const auto& name : scenarios) {
    DemoConfig dc;
    dc.scenario = name;
    dc.log_path = log_stem.empty() ? "" : sibling_path(log_stem, "_" + name);
    dc.svg_dir = svg_dir.empty() ? "" : svg_dir + "/" + name;
    dc.svg_count = svg_count;
    dc.gains.kp = cfg.kp;
    dc.gains.ki = cfg.ki;
    dc.gains.kd = cfg.kd;
    dc.seed = cfg.seed;
    const DemoResult r = run_demo(model, dc);
    std::printf("scenario %s: readouts=%d onset_tick=%d vote_tick=%d", name.c_str(),
                r.readout_ticks, r.onset_tick, r.vote_transition_tick);
    if (r.onset_tick >= 0 && r.vote_transition_tick >= 0) {
      std::printf(" delta_ticks=%d", r.vote_transition_tick - r.onset_tick);
    }
    if (r.maneuver_end_t > 0) {
      std::printf(" maneuver_seconds=%.2f", r.maneuver_end_t - r.maneuver_start_t);
    }
    std::printf(" risk_flags=%llu mean_latency_ms=%.3f svg=%d\n",
                static_cast<unsigned long long>(r.risk_flag_count), r.mean_latency_ms,
                r.svg_written);
  }
  return 0;
}

int cmd_serve(const ScenarioConfig& cfg, const std::string& model_path, double duration_s,
              const std::string& bind_address) {
  cfg.validate();
  if (cfg.log_port == 0) throw ConfigError("serve requires --log_port > 0");

  Simulation sim(cfg.to_sim_config());

  std::optional<RnnModel> model;
  std::optional<InferenceEngine> engine;
  if (!model_path.empty()) {
    model = load_model(model_path);
    engine.emplace(model_predictor(*model), model->config.seq_len, model->config.input_dim,
                   sim.road());
  }

  std::mutex control_mu;
  std::vector<ControlMessage> control_queue;
  auto on_control = [&](const ControlMessage& msg) {
    std::lock_guard lock(control_mu);
    control_queue.push_back(msg);
  };

  TelemetryServer server({bind_address, static_cast<uint16_t>(cfg.log_port), 256}, on_control);
  server.start();
  std::printf("serving frames on %s:%u\n", bind_address.c_str(), server.port());

  std::optional<TelemetryServer> control_server;
  if (cfg.control_port > 0) {
    control_server.emplace(
        ServerOptions{bind_address, static_cast<uint16_t>(cfg.control_port), 256}, on_control);
    control_server->start();
    std::printf("accepting controls on %s:%u\n", bind_address.c_str(), control_server->port());
  }

  bool paused = false;
  uint64_t published = 0;
  const auto t0 = std::chrono::steady_clock::now();
  const double dt = sim.config().dt;

  for (uint64_t i = 0; duration_s <= 0.0 || sim.time() < duration_s; ++i) {
    {
      std::lock_guard lock(control_mu);
      for (const auto& msg : control_queue) {
        if (msg.command) {
          if (*msg.command == "pause") paused = true;
          if (*msg.command == "resume") paused = false;
          if (*msg.command == "reseed" && msg.seed) sim.reseed(*msg.seed);
          if (*msg.command == "set_intention" && msg.vehicle_id && msg.intention &&
              *msg.intention >= 0 && *msg.intention < kNumTrainableClasses) {
            sim.force_intention(*msg.vehicle_id, static_cast<Intention>(*msg.intention));
          }
        } else if (msg.vehicle_id && msg.controls) {
          sim.apply_external_controls(*msg.vehicle_id, *msg.controls);
        }
      }
      control_queue.clear();
    }

    if (!cfg.batchmode) {
      std::this_thread::sleep_until(t0 + std::chrono::duration<double>(i * dt));
    }
    if (paused) {
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
      continue;
    }

    const auto frames = sim.tick();
    if (frames.empty()) continue;

    FrameMessage msg;
    msg.tick = ++published;
    msg.t_ms = frames.front().t_ms;
    std::optional<TickResult> tick;
    if (engine) tick = engine->tick(frames);
    for (const auto& f : frames) {
      VehicleFrame v;
      v.id = f.agent_id;
      v.x = f.state.x;
      v.y = f.state.y;
      v.heading = f.state.heading;
      v.v_lon = f.state.v_lon;
      v.v_lat = f.state.v_lat;
      v.tire_angle = f.state.tire_angle;
      v.signal_left = f.state.signal_left;
      v.signal_right = f.state.signal_right;
      v.intention = static_cast<int>(f.raw_label);
      if (tick) {
        for (const auto& agent : tick->agents) {
          if (agent.agent_id == f.agent_id && agent.voted) v.prediction = agent.voted;
        }
      }
      msg.vehicles.push_back(v);
    }
    if (tick) msg.risk_flags = tick->flags;
    server.publish(msg);
  }

  server.stop();
  if (control_server) control_server->stop();
  std::printf("published %llu frames\n", static_cast<unsigned long long>(published));
  return 0;
}

// "-batchmode" is accepted as a single-dash alias.
std::vector<std::string> preprocess_args(int argc, const char* const* argv) {
  std::vector<std::string> args;
  args.reserve(static_cast<size_t>(argc));
  for (int i = 0; i < argc; ++i) {
    std::string a = argv[i];
    if (a == "-batchmode") a = "--batchmode";
    args.push_back(std::move(a));
  }
  return args;
}

}  // namespace

int run(int argc, const char* const* argv) {
  const std::vector<std::string> args = preprocess_args(argc, argv);

  // Load --config first so flags parsed afterwards override file values.
  ScenarioConfig cfg;
  try {
    for (size_t i = 1; i < args.size(); ++i) {
      if (args[i] == "--config" && i + 1 < args.size()) {
        cfg = ScenarioConfig::load(args[i + 1]);
      } else if (args[i].rfind("--config=", 0) == 0) {
        cfg = ScenarioConfig::load(args[i].substr(9));
      }
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: config: %s\n", e.what());
    return 2;
  }

  CLI::App app{"desk-scale driving-intention pipeline: simulate, record, train, evaluate, infer"};
  app.require_subcommand(1);

  std::string out_path = "dataset.seerseq";
  std::string dataset_path;
  std::string model_path = "model.seernet";
  std::string model_out = "model.seernet";
  std::string json_out;
  std::string log_out;
  std::string scenario = "all";
  std::string log_stem = "demo_log.ndjson";
  std::string svg_dir;
  std::string bind_address = "127.0.0.1";
  std::string preset;
  int svg_count = 0;
  double duration_s = 0.0;

  auto* gen = app.add_subcommand("generate", "simulate traffic and record a labeled dataset");
  add_common_flags(gen, cfg);
  gen->add_option("--num_sequences", cfg.num_sequences, "sequences to record");
  gen->add_option("--test_fraction", cfg.test_fraction, "also write a seeded train/test split");
  gen->add_option("--preset", preset, "scene preset: desk (tuned recording scene)");
  gen->add_option("--out", out_path, "output dataset file")->required();

  auto* tr = app.add_subcommand("train", "train an intention classifier on a dataset");
  add_common_flags(tr, cfg);
  tr->add_option("--cell", cfg.cell, "lstm | gru");
  tr->add_option("--hidden_dim", cfg.hidden_dim, "recurrent units");
  tr->add_option("--embed_dim", cfg.embed_dim, "embedding width");
  tr->add_option("--epochs", cfg.epochs, "training epochs");
  tr->add_option("--batch_size", cfg.batch_size, "sequences per batch");
  tr->add_option("--learning_rate", cfg.learning_rate, "optimizer step size");
  tr->add_flag("!--keep_stop", cfg.drop_stop, "keep stop-labeled sequences");
  tr->add_option("--dataset", dataset_path, "training dataset")->required();
  tr->add_option("--model_out", model_out, "model file to write");
  tr->add_option("--log_out", log_out, "JSON training log");

  auto* ev = app.add_subcommand("eval", "per-timestep precision/recall of a model");
  add_common_flags(ev, cfg);
  ev->add_option("--model", model_path, "model file")->required();
  ev->add_option("--dataset", dataset_path, "test dataset")->required();
  ev->add_option("--json_out", json_out, "machine-readable report");

  auto* dm = app.add_subcommand("demo", "scripted lane-change and conflict inference runs");
  add_common_flags(dm, cfg);
  dm->add_option("--model", model_path, "model file")->required();
  dm->add_option("--scenario", scenario, "lane_change | conflict | all");
  dm->add_option("--out_log", log_stem, "NDJSON prediction log stem");
  dm->add_option("--svg_dir", svg_dir, "directory for SVG snapshots");
  dm->add_option("--svg_count", svg_count, "snapshots to write");

  auto* sv = app.add_subcommand("serve", "run the world loop and stream frames over TCP");
  add_common_flags(sv, cfg);
  sv->add_option("--log_port", cfg.log_port, "frame stream port");
  sv->add_option("--control_port", cfg.control_port, "extra control-only port");
  sv->add_option("--bind", bind_address, "bind address");
  sv->add_option("--model", model_path, "stream predictions from this model");
  sv->add_option("--duration", duration_s, "seconds to run (0 = forever)");

  auto* dc = app.add_subcommand("dump-config", "print the effective configuration");
  add_common_flags(dc, cfg);
  dc->add_option("--out", json_out, "write to file instead of stdout");

  std::vector<const char*> arg_ptrs;
  arg_ptrs.reserve(args.size());
  for (const auto& a : args) arg_ptrs.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(arg_ptrs.size()), arg_ptrs.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_generate(cfg, out_path, preset);
    if (tr->parsed()) return cmd_train(cfg, dataset_path, model_out, log_out);
    if (ev->parsed()) return cmd_eval(cfg, model_path, dataset_path, json_out);
    if (dm->parsed()) return cmd_demo(cfg, model_path, scenario, log_stem, svg_dir, svg_count);
    if (sv->parsed()) {
      const std::string mp = sv->count("--model") > 0 ? model_path : "";
      return cmd_serve(cfg, mp, duration_s, bind_address);
    }
    if (dc->parsed()) {
      cfg.validate();
      if (json_out.empty()) {
        std::printf("%s\n", cfg.to_json_string().c_str());
      } else {
        std::ofstream out(json_out, std::ios::trunc);
        out << cfg.to_json_string() << "\n";
        if (!out.good()) throw FormatError("cannot write '" + json_out + "'");
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: config: %s\n", e.what());
    return 2;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: format: %s\n", e.what());
    return 3;
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: data: %s\n", e.what());
    return 3;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: runtime: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: runtime: %s\n", e.what());
    return 4;
  }
  return 0;
}

}  // namespace seer::cli
