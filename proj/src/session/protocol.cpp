#include "putty/session/protocol.hpp"

#include <cstring>

namespace putty::protocol {

using nlohmann::json;

namespace {

template <class... F>
struct overloaded : F... {
  using F::operator()...;
};
template <class... F>
overloaded(F...) -> overloaded<F...>;

const json& member(const json& j, const char* name) {
  if (!j.contains(name)) throw ProtocolError("bad_request", std::string("missing field '") + name + "'");
  return j.at(name);
}

}  // namespace

json to_json(const ClientMessage& m) {
  json j = std::visit(
      overloaded{
          [](const Hello& h) { return json{{"type", "hello"}, {"version", h.version}, {"observer", h.observer}, {"lockstep", h.lockstep}}; },
          [](const LoadScene& s) { return json{{"type", "load_scene"}, {"scene", scene_to_json(s.scene)}}; },
          [](const PoseUpdate& p) {
            json j{{"type", "pose"}, {"hand", hand_name(p.hand)}, {"joints", joints_to_json(p.joints)}};
            if (p.time) j["t"] = *p.time;
            return j;
          },
          [](const Gesture& g) { return json{{"type", "gesture"}, {"event", event_to_json(g.event)}}; },
          [](const MaterialUpdate& u) { return json{{"type", "material"}, {"object", u.object}, {"material", material_to_json(u.params)}}; },
          [](const Edit& e) { return json{{"type", "edit"}, {"op", edit_to_json(e.op)}}; },
          [](const SnapshotRequest&) { return json{{"type", "snapshot"}}; },
          [](const RestoreRequest& r) { return json{{"type", "restore"}, {"snapshot", r.snapshot}}; },
          [](const Step& s) { return json{{"type", "step"}, {"frames", s.frames}}; },
      },
      m.payload);
  j["id"] = m.id;
  return j;
}

ClientMessage client_message_from_json(const json& j) {
  if (!j.is_object()) throw ProtocolError("bad_request", "message must be a JSON object");
  ClientMessage m;
  try {
    m.id = member(j, "id").get<std::uint64_t>();
    const auto type = member(j, "type").get<std::string>();
    if (type == "hello") {
      Hello h;
      h.version = member(j, "version").get<int>();
      h.observer = j.value("observer", false);
      h.lockstep = j.value("lockstep", false);
      m.payload = h;
    } else if (type == "load_scene") {
      m.payload = LoadScene{scene_from_json(member(j, "scene"))};
    } else if (type == "pose") {
      PoseUpdate p;
      p.hand = hand_from_name(member(j, "hand").get<std::string>());
      if (j.contains("t")) p.time = j.at("t").get<Real>();
      p.joints = joints_from_json(member(j, "joints"), "joints");
      m.payload = p;
    } else if (type == "gesture") {
      auto e = event_from_json(member(j, "event"), "event");
      if (std::holds_alternative<EditOp>(e) || std::holds_alternative<MaterialChange>(e))
        throw ProtocolError("bad_request", "gesture carries pinch or tool events only");
      m.payload = Gesture{std::move(e)};
    } else if (type == "material") {
      m.payload = MaterialUpdate{member(j, "object").get<std::uint32_t>(), material_from_json(member(j, "material"))};
    } else if (type == "edit") {
      m.payload = Edit{edit_from_json(member(j, "op"), "op")};
    } else if (type == "snapshot") {
      m.payload = SnapshotRequest{};
    } else if (type == "restore") {
      m.payload = RestoreRequest{member(j, "snapshot").get<std::uint64_t>()};
    } else if (type == "step") {
      const int frames = j.value("frames", 1);
      if (frames < 1) throw ProtocolError("bad_request", "step.frames must be >= 1");
      m.payload = Step{frames};
    } else {
      throw ProtocolError("bad_request", "unknown message type '" + type + "'");
    }
  } catch (const json::exception& e) {
    throw ProtocolError("bad_request", e.what());
  } catch (const ProtocolError&) {
    throw;
  } catch (const Error& e) {
    throw ProtocolError("bad_request", e.what());
  }
  return m;
}

json to_json(const ServerMessage& m) {
  json j = std::visit(
      overloaded{
          [](const Ready& r) {
            return json{{"type", "ready"}, {"version", r.version}, {"observer", r.observer}, {"frame", r.frame}, {"config", r.config}};
          },
          [](const Ack& a) { return json{{"type", "ack"}, {"frame", a.frame}}; },
          [](const Stats& s) {
            return json{{"type", "stats"},           {"frame", s.frame},   {"steps_per_second", s.steps_per_second},
                        {"particles", s.particles}, {"active", s.active}, {"max_penetration", s.max_penetration}};
          },
          [](const SnapshotSaved& s) { return json{{"type", "snapshot_saved"}, {"snapshot", s.snapshot}, {"frame", s.frame}}; },
          [](const ErrorMessage& e) { return json{{"type", "error"}, {"code", e.code}, {"message", e.message}}; },
      },
      m.payload);
  j["id"] = m.id;
  if (m.reply_to) j["reply_to"] = *m.reply_to;
  return j;
}

ServerMessage server_message_from_json(const json& j) {
  ServerMessage m;
  try {
    m.id = j.at("id").get<std::uint64_t>();
    if (j.contains("reply_to")) m.reply_to = j.at("reply_to").get<std::uint64_t>();
    const auto type = j.at("type").get<std::string>();
    if (type == "ready") {
      m.payload = Ready{j.at("version").get<int>(), j.value("observer", false), j.at("frame").get<std::uint64_t>(), j.at("config")};
    } else if (type == "ack") {
      m.payload = Ack{j.at("frame").get<std::uint64_t>()};
    } else if (type == "stats") {
      m.payload = Stats{j.at("frame").get<std::uint64_t>(), j.at("steps_per_second").get<Real>(), j.at("particles").get<std::size_t>(),
                        j.at("active").get<std::size_t>(), j.at("max_penetration").get<Real>()};
    } else if (type == "snapshot_saved") {
      m.payload = SnapshotSaved{j.at("snapshot").get<std::uint64_t>(), j.at("frame").get<std::uint64_t>()};
    } else if (type == "error") {
      m.payload = ErrorMessage{j.at("code").get<std::string>(), j.at("message").get<std::string>()};
    } else {
      throw ParseError("unknown server message type '" + type + "'");
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("server message: ") + e.what());
  }
  return m;
}

// ---------------------------------------------------------------------------
// Mesh frames

MeshFrame mesh_frame(std::uint64_t frame, std::span<const SurfaceMesh> meshes) {
  MeshFrame f;
  f.frame = frame;
  for (const auto& m : meshes) {
    MeshFrame::Category c;
    c.category = m.category;
    c.positions.reserve(3 * m.vertices.size());
    for (const auto& v : m.vertices)
      for (int d = 0; d < 3; ++d) c.positions.push_back(static_cast<float>(v(d)));
    c.indices.reserve(3 * m.triangles.size());
    for (const auto& t : m.triangles) c.indices.insert(c.indices.end(), t.begin(), t.end());
    f.categories.push_back(std::move(c));
  }
  return f;
}

namespace {

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    u32(bits);
  }

 private:
  std::vector<std::uint8_t>& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint64_t uint(int bytes) {
    if (pos_ + bytes > in_.size()) throw ParseError("mesh frame: truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= std::uint64_t(in_[pos_ + i]) << (8 * i);
    pos_ += bytes;
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
  float f32() {
    const std::uint32_t bits = u32();
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_mesh_frame(const MeshFrame& frame) {
  std::vector<std::uint8_t> out(kMeshMagic, kMeshMagic + 4);
  Writer w(out);
  w.u64(frame.frame);
  w.u32(static_cast<std::uint32_t>(frame.categories.size()));
  for (const auto& c : frame.categories) {
    if (c.positions.size() % 3) throw Error("mesh frame: position count not a multiple of 3");
    w.u32(c.category);
    w.u32(static_cast<std::uint32_t>(c.positions.size() / 3));
    w.u32(static_cast<std::uint32_t>(c.indices.size()));
    for (float f : c.positions) w.f32(f);
    for (auto i : c.indices) w.u32(i);
  }
  return out;
}

MeshFrame decode_mesh_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMeshMagic, 4) != 0) throw ParseError("mesh frame: bad magic");
  Reader r(bytes.subspan(4));
  MeshFrame f;
  f.frame = r.uint(8);
  const std::uint32_t count = r.u32();
  for (std::uint32_t k = 0; k < count; ++k) {
    MeshFrame::Category c;
    c.category = r.u32();
    const std::uint64_t nv = r.u32();
    const std::uint64_t ni = r.u32();
    if ((3 * nv + ni) * 4 > r.remaining()) throw ParseError("mesh frame: truncated");
    c.positions.resize(3 * nv);
    for (auto& p : c.positions) p = r.f32();
    c.indices.resize(ni);
    for (auto& i : c.indices) {
      i = r.u32();
      if (i >= nv) throw ParseError("mesh frame: index out of range");
    }
    f.categories.push_back(std::move(c));
  }
  if (r.remaining()) throw ParseError("mesh frame: trailing bytes");
  return f;
}

std::vector<SurfaceMesh> frame_meshes(const MeshFrame& frame) {
  std::vector<SurfaceMesh> out;
  for (const auto& c : frame.categories) {
    SurfaceMesh m;
    m.category = c.category;
    for (std::size_t i = 0; i + 2 < c.positions.size(); i += 3) m.vertices.emplace_back(c.positions[i], c.positions[i + 1], c.positions[i + 2]);
    for (std::size_t i = 0; i + 2 < c.indices.size(); i += 3) m.triangles.push_back({c.indices[i], c.indices[i + 1], c.indices[i + 2]});
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace putty::protocol
