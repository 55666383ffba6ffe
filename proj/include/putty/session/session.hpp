#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "putty/core/state.hpp"
#include "putty/interaction/simulation.hpp"
#include "putty/session/protocol.hpp"

namespace putty {

struct SessionOptions {
  std::size_t mesh_queue = 4;         // mesh frames kept per client; oldest dropped first
  std::size_t text_queue = 4096;      // a client this far behind on text is dropped
  double autosave_seconds = 10;       // <= 0 disables autosave
  std::size_t snapshot_ring = 10;
  std::optional<std::filesystem::path> snapshot_dir;  // also persist snapshots here
  bool lockstep = false;              // frames advance only on Step messages
};

/// Outgoing message queue of one client. Text messages are never dropped;
/// binary mesh frames are bounded and the oldest one goes first.
class Outbox {
 public:
  struct Item {
    bool binary = false;
    std::string text;
    std::shared_ptr<const std::vector<std::uint8_t>> bytes;
  };

  Outbox(std::size_t mesh_capacity, std::size_t text_capacity) : mesh_capacity_(mesh_capacity), text_capacity_(text_capacity) {}

  void push_text(std::string text);
  void push_mesh(std::shared_ptr<const std::vector<std::uint8_t>> bytes);
  std::optional<Item> pop();
  std::size_t size() const;
  std::size_t dropped_meshes() const;

  /// Marks the client for disconnection; pending items are discarded.
  void close();
  bool closed() const;
  /// Called (from the pushing thread) whenever items arrive or the box closes.
  void set_notify(std::function<void()> notify);

 private:
  void notify();

  mutable std::mutex mutex_;
  std::deque<Item> items_;
  std::size_t meshes_ = 0;
  std::size_t dropped_ = 0;
  std::size_t mesh_capacity_;
  std::size_t text_capacity_;
  bool closed_ = false;
  std::function<void()> notify_;
};

/// A live, steerable simulation. Network threads call connect / receive /
/// disconnect, which only enqueue; tick() runs on the frame thread and is
/// the single writer of simulation state.
class Session {
 public:
  using ClientId = std::uint64_t;

  explicit Session(SceneConfig config, SessionOptions options = {});
  Session(SceneConfig config, SimState initial, SessionOptions options = {});

  ClientId connect();
  void disconnect(ClientId client);
  void receive(ClientId client, std::string text);
  /// Binary client frames are not part of the protocol: the client is dropped.
  void receive_binary(ClientId client);
  std::shared_ptr<Outbox> outbox(ClientId client) const;

  /// Drains the inbox at the frame boundary, then simulates one frame unless
  /// the session is in lockstep and no Step is pending. Returns whether a
  /// frame was simulated.
  bool tick();
  /// Blocks until input arrives or the timeout passes.
  void wait_for_input(std::chrono::milliseconds timeout);

  bool lockstep() const noexcept { return options_.lockstep; }
  const FrameSimulator& simulator() const noexcept { return *sim_; }
  /// Input timeline as applied, for offline replay.
  Trajectory recording() const;
  std::vector<std::uint64_t> snapshot_ids() const;
  /// Stores a snapshot of the current state in the ring; returns its id.
  std::uint64_t save_snapshot();
  /// Current surface meshes as a frame (computed on demand).
  protocol::MeshFrame current_mesh() const;

 private:
  struct Client {
    std::shared_ptr<Outbox> outbox;
    bool greeted = false;
    bool observer = false;
    std::uint64_t last_id = 0;
    std::uint64_t next_out_id = 1;
    bool wants_mesh = false;
  };
  struct Inbound {
    ClientId client = 0;
    std::optional<std::string> text;  // nullopt: binary frame
    bool disconnect = false;
  };

  void handle(ClientId id, Client& client, const std::string& text);
  void apply(ClientId id, Client& client, const protocol::ClientMessage& msg);
  void send(Client& client, protocol::ServerPayload payload, std::optional<std::uint64_t> reply_to = {});
  void record_pose(Hand hand, Real time, const JointMap& joints);
  void record_event(const InputEvent& e);
  void reset_simulator(SceneConfig config, std::optional<SimState> initial);
  void simulate_frame();
  void send_mesh(bool only_waiting);
  std::optional<SimState> find_snapshot(std::uint64_t id) const;
  void drop(ClientId id);

  SessionOptions options_;
  std::unique_ptr<FrameSimulator> sim_;

  mutable std::mutex inbox_mutex_;
  std::condition_variable inbox_cv_;
  std::deque<Inbound> inbox_;
  std::map<ClientId, std::shared_ptr<Outbox>> outboxes_;
  ClientId next_client_ = 1;

  std::map<ClientId, Client> clients_;
  std::optional<ClientId> steering_;
  bool default_lockstep_ = false;
  int frames_since_mesh_ = 0;
  FrameMetrics last_metrics_;
  std::array<std::optional<Real>, 2> last_pose_time_;

  std::map<Real, TrajectorySample> recording_;
  std::deque<std::pair<std::uint64_t, Snapshot>> ring_;
  std::uint64_t next_snapshot_ = 1;
  std::chrono::steady_clock::time_point last_autosave_;
};

}  // namespace putty
