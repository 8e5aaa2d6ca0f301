#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <istream>
#include <memory>
#include <mutex>
#include <optional>
#include <streambuf>
#include <string>
#include <thread>
#include <vector>

#include "seer/infer.hpp"
#include "seer/vehicle.hpp"

namespace seer {

constexpr int kWireVersion = 1;

struct VehicleFrame {
  int id = 0;
  double x = 0.0, y = 0.0, heading = 0.0;
  double v_lon = 0.0, v_lat = 0.0, tire_angle = 0.0;
  bool signal_left = false, signal_right = false;
  std::optional<int> intention;   // ground-truth raw label, when known
  std::optional<int> prediction;  // voted intention, when inference runs

  bool operator==(const VehicleFrame&) const = default;
};

// One tick of world state, one JSON object per line on the wire.
struct FrameMessage {
  uint64_t tick = 0;
  uint64_t t_ms = 0;
  std::vector<VehicleFrame> vehicles;
  std::vector<RiskFlag> risk_flags;

  bool operator==(const FrameMessage&) const = default;
};

// Inbound: either direct vehicle controls or a scenario command
// (pause | resume | reseed | set_intention).
struct ControlMessage {
  std::optional<int> vehicle_id;
  std::optional<Controls> controls;
  std::optional<std::string> command;
  std::optional<int> intention;
  std::optional<uint64_t> seed;
};

// Encoders emit a single line without the trailing newline. Decoders reject
// unknown fields, missing fields, duplicate vehicle ids and version
// mismatches with ProtocolError naming the offender.
std::string encode_frame(const FrameMessage& msg);
FrameMessage decode_frame(const std::string& line);
std::string encode_control(const ControlMessage& msg);
ControlMessage decode_control(const std::string& line);

// Validated frame iterator over any newline-delimited stream (socket, file
// capture). Non-frame message types are skipped; schema violations throw;
// end of stream yields nullopt.
class FrameStreamReader {
 public:
  explicit FrameStreamReader(std::istream& in) : in_(in) {}
  std::optional<FrameMessage> next();

 private:
  std::istream& in_;
};

// Minimal read-only streambuf over a connected socket fd, for client_read
// over live connections.
class FdStreamBuf : public std::streambuf {
 public:
  explicit FdStreamBuf(int fd) : fd_(fd) {}

 protected:
  int_type underflow() override;

 private:
  int fd_;
  char buf_[4096];
};

struct ServerOptions {
  std::string bind_address = "127.0.0.1";
  uint16_t port = 0;  // 0 picks an ephemeral port
  size_t backlog_cap = 256;
  int send_buffer_bytes = 0;  // 0 keeps the kernel default; tests shrink it
};

// Newline-delimited JSON fan-out server. Each subscriber gets every frame
// published after it connected, in order; a subscriber whose backlog exceeds
// backlog_cap is disconnected rather than buffered without bound. Control
// lines arriving on any connection are decoded and handed to the callback;
// malformed lines get an error reply and the connection stays open.
class TelemetryServer {
 public:
  using ControlHandler = std::function<void(const ControlMessage&)>;

  TelemetryServer(ServerOptions options, ControlHandler on_control);
  ~TelemetryServer();
  TelemetryServer(const TelemetryServer&) = delete;
  TelemetryServer& operator=(const TelemetryServer&) = delete;

  void start();  // StartupError on bind failure
  void stop();
  uint16_t port() const { return port_; }

  void publish(const FrameMessage& frame);

  struct Stats {
    size_t subscribers = 0;
    size_t max_backlog = 0;        // largest queue depth ever observed
    uint64_t slow_disconnects = 0; // subscribers dropped for falling behind
  };
  Stats stats() const;

 private:
  struct Conn {
    int fd = -1;
    std::deque<std::shared_ptr<const std::string>> queue;
    std::mutex mu;
    std::condition_variable cv;
    bool dead = false;
    std::thread writer;
    std::thread reader;
  };

  void accept_loop();
  void writer_loop(Conn* conn);
  void reader_loop(Conn* conn);
  void enqueue(Conn* conn, std::shared_ptr<const std::string> line);
  void reap_dead_locked();

  ServerOptions options_;
  ControlHandler on_control_;
  int listen_fd_ = -1;
  uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  mutable std::mutex conns_mu_;
  std::vector<std::unique_ptr<Conn>> conns_;
  mutable std::mutex stats_mu_;
  Stats stats_;
};

}  // namespace seer
