#include <doctest.h>

#include <filesystem>

#include "putty/interaction/simulation.hpp"
#include "putty/session/server.hpp"
#include "putty/surfacing/density.hpp"
#include "support.hpp"

using namespace putty;
namespace pr = putty::protocol;
using nlohmann::json;

namespace {

SceneConfig scene() {
  SceneConfig c;
  c.grid_resolution = 32;
  c.dt = default_dt(32);
  c.substeps_per_frame = 5;
  c.surfacing.resolution = 32;
  c.surfacing.cadence = 1;
  ShapeSpec s;
  s.radius = 0.15;
  c.shapes.push_back(s);
  return c;
}

JointMap palm_at(const Vec3& p) { return JointMap{{"palm", Joint{p, Quat::Identity()}}}; }

Trajectory poke(int frames, Real interval) {
  Trajectory t;
  for (int f = 0; f <= frames; ++f) {
    TrajectorySample s;
    s.time = f * interval;
    s.hands[1] = palm_at(Vec3(0.5, 0.72 - 0.004 * f, 0.42));
    if (f == 0) s.events.push_back(ToolSelect{Hand::Right, "plate"});
    if (f == 3) s.events.push_back(PinchStart{Hand::Left, Vec3(0.5, 0.5, 0.62), 0.06, 1});
    if (f == 4) s.events.push_back(PinchMove{Hand::Left, Vec3(0.5, 0.5, 0.68)});
    if (f == 8) s.events.push_back(PinchEnd{Hand::Left});
    t.samples.push_back(s);
  }
  return t;
}

/// In-process client: frames messages and drains the outbox.
struct Probe {
  Session& session;
  Session::ClientId id;
  std::uint64_t next = 1;
  std::vector<pr::ServerMessage> texts;
  std::vector<std::vector<std::uint8_t>> meshes;

  explicit Probe(Session& s) : session(s), id(s.connect()) {}

  std::uint64_t send(pr::ClientPayload p) {
    const pr::ClientMessage m{next++, std::move(p)};
    session.receive(id, pr::to_json(m).dump());
    return m.id;
  }
  void drain() {
    while (auto item = session.outbox(id) ? session.outbox(id)->pop() : std::nullopt) {
      if (item->binary) meshes.push_back(*item->bytes);
      else texts.push_back(pr::server_message_from_json(json::parse(item->text)));
    }
  }
  const pr::ServerMessage* reply(std::uint64_t to) const {
    for (auto it = texts.rbegin(); it != texts.rend(); ++it)
      if (it->reply_to == to) return &*it;
    return nullptr;
  }
  std::string error_code(std::uint64_t to) const {
    const auto* r = reply(to);
    const auto* e = r ? std::get_if<pr::ErrorMessage>(&r->payload) : nullptr;
    return e ? e->code : "";
  }
};

}  // namespace

TEST_CASE("mesh frame layout") {
  pr::MeshFrame f;
  f.frame = 0x0102030405060708ull;
  f.categories.push_back({7, {1.0f, 2.0f, 3.0f, 0.5f, 0.25f, -1.0f, 0, 0, 1}, {0, 1, 2}});
  f.categories.push_back({9, {}, {}});
  const auto bytes = pr::encode_mesh_frame(f);
  // hand-built expectation
  std::vector<std::uint8_t> expect{'P', 'T', 'Y', 'M', 8, 7, 6, 5, 4, 3, 2, 1, 2, 0, 0, 0, 7, 0, 0, 0, 3, 0, 0, 0, 3, 0, 0, 0};
  for (float v : f.categories[0].positions) {
    std::uint32_t b;
    std::memcpy(&b, &v, 4);
    for (int i = 0; i < 4; ++i) expect.push_back(static_cast<std::uint8_t>(b >> (8 * i)));
  }
  for (std::uint8_t i : {0, 1, 2}) expect.insert(expect.end(), {i, 0, 0, 0});
  expect.insert(expect.end(), {9, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0});
  CHECK(bytes == expect);
  CHECK(pr::decode_mesh_frame(bytes) == f);
  CHECK(pr::encode_mesh_frame(pr::decode_mesh_frame(bytes)) == bytes);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(pr::decode_mesh_frame(bad), ParseError);
  CHECK_THROWS_AS(pr::decode_mesh_frame(std::span(bytes).first(bytes.size() - 1)), ParseError);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(pr::decode_mesh_frame(trailing), ParseError);
  auto out_of_range = bytes;
  out_of_range[28 + 36 + 8] = 5;  // third index of category 7
  CHECK_THROWS_AS(pr::decode_mesh_frame(out_of_range), ParseError);
}

TEST_CASE("client message codec") {
  const std::vector<pr::ClientPayload> all{
      pr::Hello{1, true, true},
      pr::LoadScene{scene()},
      pr::PoseUpdate{Hand::Left, 0.25, palm_at(Vec3(0.1, 0.2, 0.3))},
      pr::PoseUpdate{Hand::Right, std::nullopt, palm_at(Vec3(0.1, 0.2, 0.3))},
      pr::Gesture{PinchStart{Hand::Right, Vec3(0.5, 0.5, 0.5), 0.1, 2}},
      pr::Gesture{ToolSelect{Hand::Left, "rod"}},
      pr::MaterialUpdate{3, MaterialParams{}},
      pr::Edit{CopyOp{1, Vec3(0.1, 0, 0)}},
      pr::SnapshotRequest{},
      pr::RestoreRequest{42},
      pr::Step{3},
  };
  std::uint64_t id = 10;
  for (const auto& p : all) {
    const json j = pr::to_json(pr::ClientMessage{id, p});
    const auto back = pr::client_message_from_json(json::parse(j.dump()));
    CHECK(back.id == id);
    CHECK(back.payload.index() == p.index());
    CHECK(pr::to_json(back) == j);
    ++id;
  }
  auto code = [](const json& j) {
    try {
      pr::client_message_from_json(j);
    } catch (const pr::ProtocolError& e) {
      return e.code();
    }
    return std::string("none");
  };
  CHECK(code(json{{"type", "hello"}, {"version", 1}}) == "bad_request");  // no id
  CHECK(code(json{{"id", 1}, {"type", "dance"}}) == "bad_request");
  CHECK(code(json{{"id", 1}, {"type", "step"}, {"frames", 0}}) == "bad_request");
  CHECK(code(json{{"id", 1}, {"type", "gesture"}, {"event", {{"type", "edit"}, {"op", "reset"}}}}) == "bad_request");
  CHECK(code(json::array()) == "bad_request");

  for (const pr::ServerPayload& p : std::vector<pr::ServerPayload>{pr::Ready{1, false, 3, json{{"a", 1}}}, pr::Ack{4},
                                                                    pr::Stats{5, 120.5, 1000, 10, 1e-7},
                                                                    pr::SnapshotSaved{2, 9}, pr::ErrorMessage{"not_found", "x"}}) {
    const json j = pr::to_json(pr::ServerMessage{7, 3, p});
    CHECK(pr::to_json(pr::server_message_from_json(j)) == j);
  }
}

TEST_CASE("outbox bounds meshes but keeps text") {
  Outbox box(2, 100);
  int notified = 0;
  box.set_notify([&] { ++notified; });
  for (int i = 0; i < 5; ++i) {
    box.push_mesh(std::make_shared<const std::vector<std::uint8_t>>(1, static_cast<std::uint8_t>(i)));
    box.push_text("stats " + std::to_string(i));
  }
  CHECK(notified == 10);
  CHECK(box.size() == 7);
  CHECK(box.dropped_meshes() == 3);
  std::vector<int> meshes;
  int texts = 0;
  while (auto item = box.pop()) {
    if (item->binary) meshes.push_back((*item->bytes)[0]);
    else ++texts;
  }
  CHECK(meshes == std::vector<int>{3, 4});
  CHECK(texts == 5);
  Outbox tiny(1, 2);
  for (int i = 0; i < 3; ++i) tiny.push_text("x");
  CHECK(tiny.closed());
}

TEST_CASE("session handshake and protocol errors") {
  SessionOptions opt;
  opt.autosave_seconds = 0;
  Session s(scene(), opt);
  Probe a(s);
  const auto early = a.send(pr::SnapshotRequest{});
  const auto wrong = a.send(pr::Hello{99});
  const auto hello = a.send(pr::Hello{});
  s.tick();
  a.drain();
  CHECK(a.error_code(early) == "not_ready");
  CHECK(a.error_code(wrong) == "version_mismatch");
  const auto* ready = a.reply(hello);
  REQUIRE(ready);
  const auto& r = std::get<pr::Ready>(ready->payload);
  CHECK(r.config == scene_to_json(scene()));
  CHECK_FALSE(r.observer);
  CHECK(a.meshes.size() >= 1);
  for (std::size_t i = 1; i < a.texts.size(); ++i) CHECK(a.texts[i].id > a.texts[i - 1].id);

  // ids must increase
  s.receive(a.id, pr::to_json(pr::ClientMessage{2, pr::SnapshotRequest{}}).dump());
  const auto bad_restore = a.send(pr::RestoreRequest{77});
  const auto step = a.send(pr::Step{1});
  s.tick();
  a.drain();
  CHECK(a.error_code(2) == "bad_id");
  CHECK(a.error_code(bad_restore) == "not_found");
  CHECK(a.error_code(step) == "bad_request");  // not lockstep

  // second steering client becomes an observer
  Probe b(s);
  const auto hb = b.send(pr::Hello{});
  const auto edit = b.send(pr::Edit{DeleteOp{0}});
  s.tick();
  b.drain();
  CHECK(std::get<pr::Ready>(b.reply(hb)->payload).observer);
  CHECK(b.error_code(edit) == "read_only");
  CHECK(s.simulator().state().particles.size() > 0);

  // malformed frame and binary frames drop the sender only
  s.receive(b.id, "{not json");
  Probe c(s);
  c.send(pr::Hello{});
  s.receive_binary(c.id);
  s.tick();
  CHECK(s.outbox(b.id) == nullptr);
  CHECK(s.outbox(c.id) == nullptr);
  CHECK(s.outbox(a.id) != nullptr);
}

TEST_CASE("resting session streams identical meshes") {
  SessionOptions opt;
  opt.autosave_seconds = 0;
  opt.mesh_queue = 200;
  Session s(scene(), opt);
  Probe a(s);
  a.send(pr::Hello{});
  for (int f = 0; f < 100; ++f) s.tick();
  a.drain();
  REQUIRE(a.meshes.size() >= 100);
  std::size_t stats = 0;
  for (const auto& t : a.texts) stats += std::holds_alternative<pr::Stats>(t.payload);
  CHECK(stats == a.meshes.size());
  const auto body = [](const std::vector<std::uint8_t>& m) { return std::vector<std::uint8_t>(m.begin() + 12, m.end()); };
  for (std::size_t i = 1; i < a.meshes.size(); ++i) CHECK(body(a.meshes[i]) == body(a.meshes[0]));
  const auto last = pr::decode_mesh_frame(a.meshes.back());
  CHECK(last.frame == 100);
  REQUIRE(last.categories.size() == 1);
  CHECK(analyze_topology(pr::frame_meshes(last)[0]).euler() == 2);
}

TEST_CASE("slow client never stalls the loop") {
  SessionOptions opt;
  opt.autosave_seconds = 0;
  Session s(scene(), opt);
  Probe a(s);
  a.send(pr::Hello{});
  for (int f = 0; f < 20; ++f) s.tick();
  const auto box = s.outbox(a.id);
  CHECK(box->dropped_meshes() > 0);
  a.drain();
  CHECK(a.meshes.size() == opt.mesh_queue);
  std::size_t stats = 0;
  for (const auto& t : a.texts) stats += std::holds_alternative<pr::Stats>(t.payload);
  CHECK(stats == 20);  // one per frame; the greeting mesh rides on the first
  CHECK(s.simulator().state().frame == 20);
}

TEST_CASE("snapshots and restore") {
  SessionOptions opt;
  opt.autosave_seconds = 0;
  opt.lockstep = true;
  Session s(scene(), opt);
  Probe a(s);
  a.send(pr::Hello{});
  s.tick();
  const auto pre_mesh = s.current_mesh();
  const auto save1 = a.send(pr::SnapshotRequest{});
  s.tick();
  a.drain();
  const auto id1 = std::get<pr::SnapshotSaved>(a.reply(save1)->payload).snapshot;

  // poke: drive the plate into the clay
  Real t = 0;
  for (int f = 0; f < 8; ++f) {
    a.send(pr::PoseUpdate{Hand::Right, t, palm_at(Vec3(0.5, 0.7 - 0.01 * f, 0.42))});
    if (f == 0) a.send(pr::Gesture{ToolSelect{Hand::Right, "plate"}});
    a.send(pr::Step{1});
    t += s.simulator().config().frame_interval;
  }
  s.tick();
  const auto poked = s.simulator().state();
  CHECK_FALSE(poked.particles == s.simulator().initial_state().particles);
  const auto save2 = a.send(pr::SnapshotRequest{});
  s.tick();
  a.drain();
  const auto id2 = std::get<pr::SnapshotSaved>(a.reply(save2)->payload).snapshot;
  CHECK(id2 > id1);

  a.meshes.clear();
  const auto restore1 = a.send(pr::RestoreRequest{id1});
  s.tick();
  a.drain();
  CHECK(std::holds_alternative<pr::Ack>(a.reply(restore1)->payload));
  REQUIRE(!a.meshes.empty());
  const auto restored = pr::decode_mesh_frame(a.meshes.back());
  CHECK(restored.categories == pre_mesh.categories);

  a.send(pr::RestoreRequest{id2});
  s.tick();
  CHECK(s.simulator().state() == poked);
  CHECK(s.simulator().input_time() > 0);  // the input clock does not rewind
}

TEST_CASE("snapshot ring and disk") {
  const auto dir = std::filesystem::temp_directory_path() / "putty_session_test";
  std::filesystem::remove_all(dir);
  SessionOptions opt;
  opt.autosave_seconds = 0;
  opt.snapshot_dir = dir;
  Session s(scene(), opt);
  for (int i = 0; i < 12; ++i) s.save_snapshot();
  CHECK(s.snapshot_ids() == std::vector<std::uint64_t>{3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
  Probe a(s);
  a.send(pr::Hello{});
  const auto from_disk = a.send(pr::RestoreRequest{1});
  s.tick();
  a.drain();
  CHECK(std::holds_alternative<pr::Ack>(a.reply(from_disk)->payload));
  std::filesystem::remove_all(dir);

  SessionOptions fast;
  fast.autosave_seconds = 1e-9;
  Session auto_saving(scene(), fast);
  auto_saving.tick();
  auto_saving.tick();
  CHECK(auto_saving.snapshot_ids().size() == 2);
}

TEST_CASE("lockstep messages reproduce the offline replay") {
  const auto c = scene();
  const auto traj = poke(12, c.frame_interval);
  FrameSimulator offline(c);
  replay(offline, traj, 12);

  SessionOptions opt;
  opt.autosave_seconds = 0;
  opt.lockstep = true;
  Session s(c, opt);
  Probe a(s);
  a.send(pr::Hello{});
  std::size_t cursor = 0;
  for (int f = 0; f < 12; ++f) {
    for (; cursor < traj.samples.size() && traj.samples[cursor].time <= f * c.frame_interval + 1e-9; ++cursor) {
      const auto& smp = traj.samples[cursor];
      if (smp.hands[1]) a.send(pr::PoseUpdate{Hand::Right, smp.time, *smp.hands[1]});
      for (const auto& e : smp.events) a.send(pr::Gesture{e});
    }
    a.send(pr::Step{1});
  }
  s.tick();
  a.drain();
  for (const auto& t : a.texts) CHECK_FALSE(std::holds_alternative<pr::ErrorMessage>(t.payload));
  CHECK(s.simulator().state() == offline.state());

  // the recorded timeline replays to the same state
  FrameSimulator again(c);
  replay(again, s.recording(), 12);
  CHECK(again.state() == offline.state());
}

TEST_CASE("websocket transport") {
  const auto c = scene();
  SessionOptions opt;
  opt.autosave_seconds = 0;
  opt.lockstep = true;
  Session session(c, opt);
  SessionServer server(session, 0);
  server.start();
  {
    SessionClient client("127.0.0.1", server.port());
    const auto ready = client.await_reply(client.send(pr::Hello{1, false, true}));
    CHECK(std::get<pr::Ready>(ready.payload).config == scene_to_json(c));
    CHECK_THROWS_WITH_AS(client.await_reply(client.send(pr::RestoreRequest{5})), doctest::Contains("not_found"), Error);

    const auto traj = poke(10, c.frame_interval);
    const auto wire = wire_replay(client, traj, 10, c.frame_interval);

    FrameSimulator offline(c);
    replay(offline, traj, 10);
    const auto expected = pr::mesh_frame(offline.state().frame, surface_particles(offline.state().particles, c.domain_side, c.surfacing));
    CHECK(wire.frame == expected.frame);
    REQUIRE(wire.categories.size() == expected.categories.size());
    for (std::size_t k = 0; k < wire.categories.size(); ++k) {
      REQUIRE(wire.categories[k].positions.size() == expected.categories[k].positions.size());
      CHECK(wire.categories[k].indices == expected.categories[k].indices);
      float worst = 0;
      for (std::size_t i = 0; i < wire.categories[k].positions.size(); ++i)
        worst = std::max(worst, std::abs(wire.categories[k].positions[i] - expected.categories[k].positions[i]));
      CHECK(worst <= 1e-6f);
    }
  }
  {
    // a malformed frame drops the client
    SessionClient rude("127.0.0.1", server.port());
    rude.send_raw("{oops");
    auto read_forever = [&] {
      for (int i = 0; i < 100; ++i) rude.read();
    };
    CHECK_THROWS(read_forever());
  }
  server.stop();
}
