#include "seer/stream_io.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "seer/errors.hpp"

namespace seer {

namespace {

using nlohmann::json;

void check_known_fields(const json& j, const std::set<std::string>& allowed,
                        const char* context) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.contains(key)) {
      throw ProtocolError(std::string("unknown field '") + key + "' in " + context);
    }
  }
}

const json& require(const json& j, const char* field, const char* context) {
  auto it = j.find(field);
  if (it == j.end()) {
    throw ProtocolError(std::string("missing field '") + field + "' in " + context);
  }
  return *it;
}

double require_number(const json& j, const char* field, const char* context) {
  const json& v = require(j, field, context);
  if (!v.is_number()) {
    throw ProtocolError(std::string("field '") + field + "' in " + context + " is not a number");
  }
  return v.get<double>();
}

bool require_bool(const json& j, const char* field, const char* context) {
  const json& v = require(j, field, context);
  if (!v.is_boolean()) {
    throw ProtocolError(std::string("field '") + field + "' in " + context + " is not a bool");
  }
  return v.get<bool>();
}

void check_version(const json& j, const char* context) {
  const json& v = require(j, "v", context);
  if (!v.is_number_integer() || v.get<int>() != kWireVersion) {
    throw ProtocolError(std::string("unsupported wire version in ") + context);
  }
}

json parse_line(const std::string& line, const char* context) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ProtocolError(std::string("parse: invalid JSON in ") + context);
  }
  return j;
}

}  // namespace

std::string encode_frame(const FrameMessage& msg) {
  json j;
  j["v"] = kWireVersion;
  j["type"] = "frame";
  j["tick"] = msg.tick;
  j["t_ms"] = msg.t_ms;
  json vehicles = json::array();
  for (const auto& v : msg.vehicles) {
    json jv;
    jv["id"] = v.id;
    jv["x"] = v.x;
    jv["y"] = v.y;
    jv["heading"] = v.heading;
    jv["v_lon"] = v.v_lon;
    jv["v_lat"] = v.v_lat;
    jv["tire_angle"] = v.tire_angle;
    jv["signal_left"] = v.signal_left;
    jv["signal_right"] = v.signal_right;
    if (v.intention) jv["intention"] = *v.intention;
    if (v.prediction) jv["prediction"] = *v.prediction;
    vehicles.push_back(std::move(jv));
  }
  j["vehicles"] = std::move(vehicles);
  if (!msg.risk_flags.empty()) {
    json flags = json::array();
    for (const auto& f : msg.risk_flags) {
      flags.push_back({{"lane", f.cell.lane},
                       {"bucket", f.cell.bucket},
                       {"agents", {f.agent_a, f.agent_b}},
                       {"t_begin", f.t_begin},
                       {"t_end", f.t_end}});
    }
    j["risk_flags"] = std::move(flags);
  }
  return j.dump();
}

FrameMessage decode_frame(const std::string& line) {
  const json j = parse_line(line, "frame");
  check_known_fields(j, {"v", "type", "tick", "t_ms", "vehicles", "risk_flags"}, "frame");
  check_version(j, "frame");
  if (require(j, "type", "frame").get<std::string>() != "frame") {
    throw ProtocolError("message type is not 'frame'");
  }

  FrameMessage msg;
  msg.tick = require(j, "tick", "frame").get<uint64_t>();
  msg.t_ms = require(j, "t_ms", "frame").get<uint64_t>();

  const json& vehicles = require(j, "vehicles", "frame");
  if (!vehicles.is_array()) throw ProtocolError("field 'vehicles' in frame is not an array");
  std::unordered_set<int> seen_ids;
  for (const auto& jv : vehicles) {
    if (!jv.is_object()) throw ProtocolError("vehicle entry is not an object");
    check_known_fields(jv,
                       {"id", "x", "y", "heading", "v_lon", "v_lat", "tire_angle", "signal_left",
                        "signal_right", "intention", "prediction"},
                       "vehicle");
    VehicleFrame v;
    v.id = static_cast<int>(require_number(jv, "id", "vehicle"));
    if (!seen_ids.insert(v.id).second) {
      throw ProtocolError("duplicate vehicle id " + std::to_string(v.id) + " in frame");
    }
    v.x = require_number(jv, "x", "vehicle");
    v.y = require_number(jv, "y", "vehicle");
    v.heading = require_number(jv, "heading", "vehicle");
    v.v_lon = require_number(jv, "v_lon", "vehicle");
    v.v_lat = require_number(jv, "v_lat", "vehicle");
    v.tire_angle = require_number(jv, "tire_angle", "vehicle");
    v.signal_left = require_bool(jv, "signal_left", "vehicle");
    v.signal_right = require_bool(jv, "signal_right", "vehicle");
    if (jv.contains("intention")) v.intention = jv["intention"].get<int>();
    if (jv.contains("prediction")) v.prediction = jv["prediction"].get<int>();
    msg.vehicles.push_back(v);
  }

  if (j.contains("risk_flags")) {
    const json& flags = j["risk_flags"];
    if (!flags.is_array()) throw ProtocolError("field 'risk_flags' in frame is not an array");
    for (const auto& jf : flags) {
      check_known_fields(jf, {"lane", "bucket", "agents", "t_begin", "t_end"}, "risk_flag");
      RiskFlag f;
      f.cell.lane = static_cast<int>(require_number(jf, "lane", "risk_flag"));
      f.cell.bucket = static_cast<int>(require_number(jf, "bucket", "risk_flag"));
      const json& agents = require(jf, "agents", "risk_flag");
      if (!agents.is_array() || agents.size() != 2) {
        throw ProtocolError("field 'agents' in risk_flag must hold two ids");
      }
      f.agent_a = agents[0].get<int>();
      f.agent_b = agents[1].get<int>();
      f.t_begin = require_number(jf, "t_begin", "risk_flag");
      f.t_end = require_number(jf, "t_end", "risk_flag");
      msg.risk_flags.push_back(f);
    }
  }
  return msg;
}

std::string encode_control(const ControlMessage& msg) {
  json j;
  j["v"] = kWireVersion;
  if (msg.command) {
    j["type"] = "command";
    j["command"] = *msg.command;
    if (msg.vehicle_id) j["vehicle_id"] = *msg.vehicle_id;
    if (msg.intention) j["intention"] = *msg.intention;
    if (msg.seed) j["seed"] = *msg.seed;
  } else {
    j["type"] = "control";
    if (msg.vehicle_id) j["vehicle_id"] = *msg.vehicle_id;
    const Controls c = msg.controls.value_or(Controls{});
    j["throttle"] = c.throttle;
    j["brake"] = c.brake;
    j["hand_brake"] = c.hand_brake;
    j["steer"] = c.steer;
    j["signal_left"] = c.signal_left;
    j["signal_right"] = c.signal_right;
  }
  return j.dump();
}

ControlMessage decode_control(const std::string& line) {
  const json j = parse_line(line, "control");
  check_version(j, "control");
  const std::string type = require(j, "type", "control").get<std::string>();

  ControlMessage msg;
  if (type == "control") {
    check_known_fields(j,
                       {"v", "type", "vehicle_id", "throttle", "brake", "hand_brake", "steer",
                        "signal_left", "signal_right"},
                       "control");
    if (!j.contains("vehicle_id")) throw ProtocolError("missing field 'vehicle_id' in control");
    msg.vehicle_id = j["vehicle_id"].get<int>();
    Controls c;
    if (j.contains("throttle")) c.throttle = j["throttle"].get<double>();
    if (j.contains("brake")) c.brake = j["brake"].get<double>();
    if (j.contains("hand_brake")) c.hand_brake = j["hand_brake"].get<double>();
    if (j.contains("steer")) c.steer = j["steer"].get<double>();
    if (j.contains("signal_left")) c.signal_left = j["signal_left"].get<bool>();
    if (j.contains("signal_right")) c.signal_right = j["signal_right"].get<bool>();
    msg.controls = c;
  } else if (type == "command") {
    check_known_fields(j, {"v", "type", "command", "vehicle_id", "intention", "seed"}, "command");
    const std::string cmd = require(j, "command", "command").get<std::string>();
    if (cmd != "pause" && cmd != "resume" && cmd != "reseed" && cmd != "set_intention") {
      throw ProtocolError("unknown command '" + cmd + "'");
    }
    msg.command = cmd;
    if (j.contains("vehicle_id")) msg.vehicle_id = j["vehicle_id"].get<int>();
    if (j.contains("intention")) msg.intention = j["intention"].get<int>();
    if (j.contains("seed")) msg.seed = j["seed"].get<uint64_t>();
    if (cmd == "set_intention" && (!msg.vehicle_id || !msg.intention)) {
      throw ProtocolError("set_intention needs vehicle_id and intention");
    }
  } else {
    throw ProtocolError("unknown message type '" + type + "'");
  }
  return msg;
}

std::optional<FrameMessage> FrameStreamReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ProtocolError("parse: invalid JSON line");
    const auto type_it = j.find("type");
    if (type_it == j.end()) throw ProtocolError("missing field 'type'");
    if (*type_it == "error") continue;  // server replies to our own bad inputs
    return decode_frame(line);
  }
  return std::nullopt;
}

FdStreamBuf::int_type FdStreamBuf::underflow() {
  if (gptr() < egptr()) return traits_type::to_int_type(*gptr());
  const ssize_t n = ::recv(fd_, buf_, sizeof(buf_), 0);
  if (n <= 0) return traits_type::eof();
  setg(buf_, buf_, buf_ + n);
  return traits_type::to_int_type(*gptr());
}

TelemetryServer::TelemetryServer(ServerOptions options, ControlHandler on_control)
    : options_(std::move(options)), on_control_(std::move(on_control)) {}

TelemetryServer::~TelemetryServer() { stop(); }

void TelemetryServer::start() {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw StartupError("socket() failed");
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(options_.port);
  if (::inet_pton(AF_INET, options_.bind_address.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw StartupError("invalid bind address '" + options_.bind_address + "'");
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw StartupError("cannot bind " + options_.bind_address + ":" +
                       std::to_string(options_.port) + ": " + std::strerror(errno));
  }
  if (::listen(listen_fd_, 16) != 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw StartupError("listen() failed");
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);

  running_.store(true);
  acceptor_ = std::thread([this] { accept_loop(); });
}

void TelemetryServer::accept_loop() {
  while (running_.load()) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, 100);
    if (rc <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    if (options_.send_buffer_bytes > 0) {
      ::setsockopt(fd, SOL_SOCKET, SO_SNDBUF, &options_.send_buffer_bytes,
                   sizeof(options_.send_buffer_bytes));
    }

    auto conn = std::make_unique<Conn>();
    conn->fd = fd;
    Conn* raw = conn.get();
    conn->writer = std::thread([this, raw] { writer_loop(raw); });
    conn->reader = std::thread([this, raw] { reader_loop(raw); });

    std::lock_guard lock(conns_mu_);
    conns_.push_back(std::move(conn));
    std::lock_guard slock(stats_mu_);
    ++stats_.subscribers;
  }
}

void TelemetryServer::writer_loop(Conn* conn) {
  for (;;) {
    std::shared_ptr<const std::string> line;
    {
      std::unique_lock lock(conn->mu);
      conn->cv.wait(lock, [&] { return conn->dead || !conn->queue.empty(); });
      if (conn->dead) return;
      line = conn->queue.front();
      conn->queue.pop_front();
    }
    size_t sent = 0;
    while (sent < line->size()) {
      const ssize_t n =
          ::send(conn->fd, line->data() + sent, line->size() - sent, MSG_NOSIGNAL);
      if (n <= 0) {
        std::lock_guard lock(conn->mu);
        conn->dead = true;
        conn->cv.notify_all();
        return;
      }
      sent += static_cast<size_t>(n);
    }
  }
}

void TelemetryServer::reader_loop(Conn* conn) {
  std::string pending;
  char buf[4096];
  for (;;) {
    const ssize_t n = ::recv(conn->fd, buf, sizeof(buf), 0);
    if (n <= 0) {
      std::lock_guard lock(conn->mu);
      conn->dead = true;
      conn->cv.notify_all();
      return;
    }
    pending.append(buf, static_cast<size_t>(n));
    size_t pos;
    while ((pos = pending.find('\n')) != std::string::npos) {
      const std::string line = pending.substr(0, pos);
      pending.erase(0, pos + 1);
      if (line.empty()) continue;
      try {
        const ControlMessage msg = decode_control(line);
        if (on_control_) on_control_(msg);
      } catch (const ProtocolError& e) {
        nlohmann::json reply;
        reply["v"] = kWireVersion;
        reply["type"] = "error";
        reply["error"] = e.what();
        enqueue(conn, std::make_shared<const std::string>(reply.dump() + "\n"));
      }
    }
  }
}

void TelemetryServer::enqueue(Conn* conn, std::shared_ptr<const std::string> line) {
  bool overflow = false;
  {
    std::lock_guard lock(conn->mu);
    if (conn->dead) return;
    if (conn->queue.size() >= options_.backlog_cap) {
      conn->dead = true;
      overflow = true;
    } else {
      conn->queue.push_back(std::move(line));
      std::lock_guard slock(stats_mu_);
      stats_.max_backlog = std::max(stats_.max_backlog, conn->queue.size());
    }
    conn->cv.notify_all();
  }
  if (overflow) {
    ::shutdown(conn->fd, SHUT_RDWR);  // unblock reader/writer; reaped later
    std::lock_guard slock(stats_mu_);
    ++stats_.slow_disconnects;
  }
}

void TelemetryServer::reap_dead_locked() {
  for (auto it = conns_.begin(); it != conns_.end();) {
    Conn* conn = it->get();
    bool dead;
    {
      std::lock_guard lock(conn->mu);
      dead = conn->dead;
    }
    if (!dead) {
      ++it;
      continue;
    }
    ::shutdown(conn->fd, SHUT_RDWR);
    if (conn->writer.joinable()) conn->writer.join();
    if (conn->reader.joinable()) conn->reader.join();
    ::close(conn->fd);
    it = conns_.erase(it);
  }
}

void TelemetryServer::publish(const FrameMessage& frame) {
  const auto line = std::make_shared<const std::string>(encode_frame(frame) + "\n");
  std::lock_guard lock(conns_mu_);
  for (auto& conn : conns_) enqueue(conn.get(), line);
  reap_dead_locked();
}

TelemetryServer::Stats TelemetryServer::stats() const {
  std::lock_guard lock(stats_mu_);
  return stats_;
}

void TelemetryServer::stop() {
  if (!running_.exchange(false)) {
    if (listen_fd_ >= 0) {
      ::close(listen_fd_);
      listen_fd_ = -1;
    }
    return;
  }
  if (acceptor_.joinable()) acceptor_.join();
  ::close(listen_fd_);
  listen_fd_ = -1;

  std::lock_guard lock(conns_mu_);
  for (auto& conn : conns_) {
    {
      std::lock_guard clock(conn->mu);
      conn->dead = true;
      conn->cv.notify_all();
    }
    ::shutdown(conn->fd, SHUT_RDWR);
    if (conn->writer.joinable()) conn->writer.join();
    if (conn->reader.joinable()) conn->reader.join();
    ::close(conn->fd);
  }
  conns_.clear();
}

}  // namespace seer
