#include "putty/session/session.hpp"

#include <cmath>

#include "putty/surfacing/density.hpp"

namespace putty {

using nlohmann::json;
namespace pr = protocol;

// ---------------------------------------------------------------------------
// Outbox

void Outbox::push_text(std::string text) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) return;
    if (items_.size() - meshes_ >= text_capacity_) {
      closed_ = true;  // hopelessly behind
      items_.clear();
    } else {
      items_.push_back(Item{false, std::move(text), nullptr});
    }
  }
  notify();
}

void Outbox::push_mesh(std::shared_ptr<const std::vector<std::uint8_t>> bytes) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) return;
    if (mesh_capacity_ == 0) return;
    if (meshes_ >= mesh_capacity_) {
      const auto oldest = std::find_if(items_.begin(), items_.end(), [](const Item& i) { return i.binary; });
      items_.erase(oldest);
      --meshes_;
      ++dropped_;
    }
    items_.push_back(Item{true, {}, std::move(bytes)});
    ++meshes_;
  }
  notify();
}

std::optional<Outbox::Item> Outbox::pop() {
  std::lock_guard lock(mutex_);
  if (items_.empty()) return std::nullopt;
  Item item = std::move(items_.front());
  items_.pop_front();
  if (item.binary) --meshes_;
  return item;
}

std::size_t Outbox::size() const {
  std::lock_guard lock(mutex_);
  return items_.size();
}

std::size_t Outbox::dropped_meshes() const {
  std::lock_guard lock(mutex_);
  return dropped_;
}

void Outbox::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
    items_.clear();
    meshes_ = 0;
  }
  notify();
}

bool Outbox::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

void Outbox::set_notify(std::function<void()> notify) {
  std::lock_guard lock(mutex_);
  notify_ = std::move(notify);
}

void Outbox::notify() {
  std::function<void()> f;
  {
    std::lock_guard lock(mutex_);
    f = notify_;
  }
  if (f) f();
}

// ---------------------------------------------------------------------------
// Session

Session::Session(SceneConfig config, SessionOptions options) : options_(std::move(options)) {
  default_lockstep_ = options_.lockstep;
  reset_simulator(std::move(config), std::nullopt);
}

Session::Session(SceneConfig config, SimState initial, SessionOptions options) : options_(std::move(options)) {
  default_lockstep_ = options_.lockstep;
  reset_simulator(std::move(config), std::move(initial));
}

void Session::reset_simulator(SceneConfig config, std::optional<SimState> initial) {
  sim_ = initial ? std::make_unique<FrameSimulator>(std::move(config), std::move(*initial))
                 : std::make_unique<FrameSimulator>(config);
  recording_.clear();
  last_pose_time_ = {};
  frames_since_mesh_ = 0;
  last_autosave_ = std::chrono::steady_clock::now();
}

Session::ClientId Session::connect() {
  std::lock_guard lock(inbox_mutex_);
  const ClientId id = next_client_++;
  outboxes_[id] = std::make_shared<Outbox>(options_.mesh_queue, options_.text_queue);
  return id;
}

void Session::disconnect(ClientId client) {
  {
    std::lock_guard lock(inbox_mutex_);
    inbox_.push_back(Inbound{client, std::nullopt, true});
  }
  inbox_cv_.notify_all();
}

void Session::receive(ClientId client, std::string text) {
  {
    std::lock_guard lock(inbox_mutex_);
    inbox_.push_back(Inbound{client, std::move(text), false});
  }
  inbox_cv_.notify_all();
}

void Session::receive_binary(ClientId client) {
  {
    std::lock_guard lock(inbox_mutex_);
    inbox_.push_back(Inbound{client, std::nullopt, false});
  }
  inbox_cv_.notify_all();
}

std::shared_ptr<Outbox> Session::outbox(ClientId client) const {
  std::lock_guard lock(inbox_mutex_);
  const auto it = outboxes_.find(client);
  return it == outboxes_.end() ? nullptr : it->second;
}

void Session::wait_for_input(std::chrono::milliseconds timeout) {
  std::unique_lock lock(inbox_mutex_);
  inbox_cv_.wait_for(lock, timeout, [&] { return !inbox_.empty(); });
}

void Session::drop(ClientId id) {
  if (const auto it = clients_.find(id); it != clients_.end()) {
    it->second.outbox->close();
    clients_.erase(it);
  }
  std::shared_ptr<Outbox> box;
  {
    std::lock_guard lock(inbox_mutex_);
    if (const auto it = outboxes_.find(id); it != outboxes_.end()) {
      box = it->second;
      outboxes_.erase(it);
    }
  }
  if (box) box->close();
  if (steering_ == id) {
    steering_.reset();
    options_.lockstep = default_lockstep_;
  }
}

bool Session::tick() {
  std::deque<Inbound> batch;
  {
    std::lock_guard lock(inbox_mutex_);
    batch.swap(inbox_);
  }
  const std::uint64_t frame_before = sim_->state().frame;
  for (auto& in : batch) {
    if (in.disconnect) {
      drop(in.client);
      continue;
    }
    auto it = clients_.find(in.client);
    if (it == clients_.end()) {
      auto box = outbox(in.client);
      if (!box || box->closed()) continue;
      it = clients_.emplace(in.client, Client{box}).first;
    }
    if (!in.text) {
      drop(in.client);
      continue;
    }
    handle(in.client, it->second, *in.text);
  }

  if (options_.autosave_seconds > 0) {
    const auto now = std::chrono::steady_clock::now();
    if (std::chrono::duration<double>(now - last_autosave_).count() >= options_.autosave_seconds) {
      save_snapshot();
      last_autosave_ = now;
    }
  }
  if (!options_.lockstep) simulate_frame();
  send_mesh(true);
  return sim_->state().frame != frame_before;
}

void Session::simulate_frame() {
  last_metrics_ = sim_->step();
  const auto& params = sim_->config().surfacing;
  if (++frames_since_mesh_ >= std::max(1, params.cadence)) send_mesh(false);
}

void Session::send_mesh(bool only_waiting) {
  bool any = false;
  for (auto& [id, c] : clients_) any = any || (c.greeted && (!only_waiting || c.wants_mesh));
  if (!any) return;
  auto bytes = std::make_shared<const std::vector<std::uint8_t>>(pr::encode_mesh_frame(current_mesh()));
  const auto& m = sim_->state();
  const auto& t = sim_->last_timing();
  pr::Stats stats;
  stats.frame = m.frame;
  stats.particles = m.particles.size();
  stats.active = last_metrics_.active;
  stats.steps_per_second = t.step_seconds > 0 ? sim_->config().substeps_per_frame / t.step_seconds : 0;
  stats.max_penetration = last_metrics_.max_penetration;
  for (auto& [id, c] : clients_) {
    if (!c.greeted || (only_waiting && !c.wants_mesh)) continue;
    c.outbox->push_mesh(bytes);
    send(c, stats);
    c.wants_mesh = false;
  }
  if (!only_waiting) frames_since_mesh_ = 0;
}

pr::MeshFrame Session::current_mesh() const {
  const auto& cfg = sim_->config();
  return pr::mesh_frame(sim_->state().frame, surface_particles(sim_->state().particles, cfg.domain_side, cfg.surfacing));
}

void Session::send(Client& client, pr::ServerPayload payload, std::optional<std::uint64_t> reply_to) {
  pr::ServerMessage m{client.next_out_id++, reply_to, std::move(payload)};
  client.outbox->push_text(pr::to_json(m).dump());
}

void Session::handle(ClientId id, Client& client, const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error&) {
    drop(id);  // malformed frame
    return;
  }
  std::optional<std::uint64_t> reply_to;
  if (j.is_object() && j.contains("id") && j["id"].is_number_unsigned()) reply_to = j["id"].get<std::uint64_t>();
  pr::ClientMessage msg;
  try {
    msg = pr::client_message_from_json(j);
  } catch (const pr::ProtocolError& e) {
    send(client, pr::ErrorMessage{e.code(), e.what()}, reply_to);
    return;
  }
  if (msg.id <= client.last_id) {
    send(client, pr::ErrorMessage{"bad_id", "message ids must increase (last " + std::to_string(client.last_id) + ")"}, msg.id);
    return;
  }
  client.last_id = msg.id;
  try {
    apply(id, client, msg);
  } catch (const pr::ProtocolError& e) {
    send(client, pr::ErrorMessage{e.code(), e.what()}, msg.id);
  } catch (const Error& e) {
    send(client, pr::ErrorMessage{"bad_request", e.what()}, msg.id);
  } catch (const std::exception& e) {
    send(client, pr::ErrorMessage{"internal", e.what()}, msg.id);
  }
}

void Session::apply(ClientId id, Client& client, const pr::ClientMessage& msg) {
  const auto* hello = std::get_if<pr::Hello>(&msg.payload);
  if (!client.greeted && !hello) throw pr::ProtocolError("not_ready", "send hello first");
  if (hello) {
    if (hello->version != pr::kVersion)
      throw pr::ProtocolError("version_mismatch", "server speaks protocol version " + std::to_string(pr::kVersion));
    client.greeted = true;
    client.observer = hello->observer || (steering_ && *steering_ != id);
    if (!client.observer) {
      steering_ = id;
      options_.lockstep = default_lockstep_ || hello->lockstep;
    }
    send(client, pr::Ready{pr::kVersion, client.observer, sim_->state().frame, scene_to_json(sim_->config())}, msg.id);
    client.wants_mesh = true;
    return;
  }
  if (client.observer) throw pr::ProtocolError("read_only", "observer clients cannot steer the session");

  const auto ack = [&] { send(client, pr::Ack{sim_->state().frame}, msg.id); };
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, pr::LoadScene>) {
          reset_simulator(p.scene, std::nullopt);
          for (auto& [cid, c] : clients_) c.wants_mesh = c.greeted;
          ack();
        } else if constexpr (std::is_same_v<T, pr::PoseUpdate>) {
          const int h = static_cast<int>(p.hand);
          const Real t = p.time.value_or(sim_->input_time());
          if (last_pose_time_[h] && !(t > *last_pose_time_[h]))
            throw pr::ProtocolError("bad_request", "pose times must increase per hand");
          sim_->push_pose(p.hand, t, p.joints);
          last_pose_time_[h] = t;
          record_pose(p.hand, t, p.joints);
          ack();
        } else if constexpr (std::is_same_v<T, pr::Gesture>) {
          sim_->apply_now(p.event);
          record_event(p.event);
          ack();
        } else if constexpr (std::is_same_v<T, pr::MaterialUpdate>) {
          const InputEvent e = MaterialChange{p.object, p.params};
          sim_->apply_now(e);
          record_event(e);
          ack();
        } else if constexpr (std::is_same_v<T, pr::Edit>) {
          const InputEvent e = p.op;
          sim_->apply_now(e);
          record_event(e);
          ack();
        } else if constexpr (std::is_same_v<T, pr::SnapshotRequest>) {
          const auto sid = save_snapshot();
          send(client, pr::SnapshotSaved{sid, sim_->state().frame}, msg.id);
        } else if constexpr (std::is_same_v<T, pr::RestoreRequest>) {
          auto state = find_snapshot(p.snapshot);
          if (!state) throw pr::ProtocolError("not_found", "no snapshot with id " + std::to_string(p.snapshot));
          sim_->restore(std::move(*state));
          for (auto& [cid, c] : clients_) c.wants_mesh = c.greeted;
          ack();
        } else if constexpr (std::is_same_v<T, pr::Step>) {
          if (!options_.lockstep) throw pr::ProtocolError("bad_request", "step is only valid in lockstep sessions");
          for (int f = 0; f < p.frames; ++f) simulate_frame();
          ack();
        }
      },
      msg.payload);
}

void Session::record_pose(Hand hand, Real time, const JointMap& joints) {
  auto& s = recording_[time];
  s.time = time;
  s.hands[static_cast<int>(hand)] = joints;
}

void Session::record_event(const InputEvent& e) {
  const Real t = sim_->input_time();
  auto& s = recording_[t];
  s.time = t;
  s.events.push_back(e);
}

Trajectory Session::recording() const {
  Trajectory t;
  for (const auto& [time, s] : recording_) t.samples.push_back(s);
  return t;
}

std::vector<std::uint64_t> Session::snapshot_ids() const {
  std::vector<std::uint64_t> ids;
  for (const auto& [id, s] : ring_) ids.push_back(id);
  return ids;
}

std::uint64_t Session::save_snapshot() {
  Snapshot snap;
  snap.id = next_snapshot_++;
  snap.timestamp = std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
  snap.state = sim_->state();
  if (options_.snapshot_dir) {
    std::filesystem::create_directories(*options_.snapshot_dir);
    putty::save_snapshot(snap, *options_.snapshot_dir / ("snapshot_" + std::to_string(snap.id) + ".ptys"));
  }
  ring_.emplace_back(snap.id, std::move(snap));
  while (ring_.size() > std::max<std::size_t>(1, options_.snapshot_ring)) ring_.pop_front();
  return ring_.back().first;
}

std::optional<SimState> Session::find_snapshot(std::uint64_t id) const {
  for (const auto& [sid, snap] : ring_)
    if (sid == id) return snap.state;
  if (options_.snapshot_dir) {
    const auto path = *options_.snapshot_dir / ("snapshot_" + std::to_string(id) + ".ptys");
    if (std::filesystem::exists(path)) return load_snapshot(path).state;
  }
  return std::nullopt;
}

}  // namespace putty
