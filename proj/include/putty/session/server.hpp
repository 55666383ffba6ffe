#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <thread>
#include <variant>

#include "putty/session/session.hpp"

namespace putty {

/// WebSocket transport for a Session: text frames carry JSON control
/// messages, binary frames carry mesh frames. One I/O thread plus the frame
/// loop thread, which paces frames at the scene's frame interval (or waits
/// for Step messages in lockstep mode).
class SessionServer {
 public:
  /// Port 0 binds an ephemeral port; see port().
  SessionServer(Session& session, std::uint16_t port, const std::string& address = "127.0.0.1");
  ~SessionServer();
  SessionServer(const SessionServer&) = delete;
  SessionServer& operator=(const SessionServer&) = delete;

  std::uint16_t port() const noexcept;
  void start();
  void stop();
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Minimal blocking client, used by tests and scripted replays.
class SessionClient {
 public:
  using Incoming = std::variant<protocol::ServerMessage, protocol::MeshFrame>;

  SessionClient(const std::string& host, std::uint16_t port);
  ~SessionClient();
  SessionClient(const SessionClient&) = delete;
  SessionClient& operator=(const SessionClient&) = delete;

  /// Sends a message with the next id; returns that id.
  std::uint64_t send(protocol::ClientPayload payload);
  void send_raw(const std::string& text);
  void send_binary(const std::vector<std::uint8_t>& bytes);
  Incoming read();
  /// Reads until the reply to `id` arrives; meshes seen on the way update
  /// last_mesh(). Throws Error when the reply is an error message.
  protocol::ServerMessage await_reply(std::uint64_t id);
  const std::optional<protocol::MeshFrame>& last_mesh() const noexcept { return last_mesh_; }
  void close();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::uint64_t next_id_ = 1;
  std::optional<protocol::MeshFrame> last_mesh_;
};

/// Drives a lockstep session with a trajectory, frame by frame, the way the
/// offline replay does. Returns the mesh frame received after the last frame.
protocol::MeshFrame wire_replay(SessionClient& client, const Trajectory& trajectory, int frames, Real frame_interval);

}  // namespace putty
