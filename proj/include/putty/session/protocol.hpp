#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "putty/core/scene.hpp"
#include "putty/interaction/trajectory.hpp"
#include "putty/surfacing/mesh.hpp"

namespace putty::protocol {

inline constexpr int kVersion = 1;

// Client -> server. Every message carries an id, strictly increasing per
// connection.
struct Hello {
  int version = kVersion;
  bool observer = false;  // read-only client
  bool lockstep = false;  // frames advance only on Step
};
struct LoadScene {
  SceneConfig scene;
};
/// Joint set for one hand, or a tool pose given as a single "palm" joint.
/// Without a time the pose is stamped with the frame it is applied on.
struct PoseUpdate {
  Hand hand = Hand::Right;
  std::optional<Real> time;
  JointMap joints;
};
struct Gesture {
  InputEvent event;  // pinch events and tool selection
};
struct MaterialUpdate {
  std::uint32_t object = 0;
  MaterialParams params;
};
struct Edit {
  EditOp op;
};
struct SnapshotRequest {};
struct RestoreRequest {
  std::uint64_t snapshot = 0;
};
/// Lockstep extension: advance this many frames.
struct Step {
  int frames = 1;
};

using ClientPayload = std::variant<Hello, LoadScene, PoseUpdate, Gesture, MaterialUpdate, Edit, SnapshotRequest,
                                   RestoreRequest, Step>;

struct ClientMessage {
  std::uint64_t id = 0;
  ClientPayload payload;
};

// Server -> client (text messages; meshes travel as binary MeshFrame).
struct Ready {
  int version = kVersion;
  bool observer = false;
  std::uint64_t frame = 0;
  nlohmann::json config;
};
struct Ack {
  std::uint64_t frame = 0;  // frame boundary the message was applied at
};
struct Stats {
  std::uint64_t frame = 0;
  Real steps_per_second = 0;
  std::size_t particles = 0;
  std::size_t active = 0;
  Real max_penetration = 0;
};
struct SnapshotSaved {
  std::uint64_t snapshot = 0;
  std::uint64_t frame = 0;
};
struct ErrorMessage {
  std::string code;  // bad_request, bad_id, not_found, read_only, version_mismatch, not_ready, internal
  std::string message;
};

using ServerPayload = std::variant<Ready, Ack, Stats, SnapshotSaved, ErrorMessage>;

struct ServerMessage {
  std::uint64_t id = 0;
  std::optional<std::uint64_t> reply_to;
  ServerPayload payload;
};

/// Raised for client messages that parse as JSON but break the schema.
class ProtocolError : public Error {
 public:
  ProtocolError(std::string code, const std::string& message) : Error(message), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

nlohmann::json to_json(const ClientMessage& m);
/// Throws ProtocolError (code bad_request) for schema violations. The id is
/// read first so errors can reference it.
ClientMessage client_message_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ServerMessage& m);
ServerMessage server_message_from_json(const nlohmann::json& j);

/// Binary mesh frame, little-endian:
///   "PTYM" | u64 frame | u32 category count |
///   per category: u32 category | u32 vertex count | u32 index count |
///                 f32 xyz * vertex count | u32 * index count
struct MeshFrame {
  std::uint64_t frame = 0;
  struct Category {
    std::uint32_t category = 0;
    std::vector<float> positions;        // xyz triples
    std::vector<std::uint32_t> indices;  // triangle list
    bool operator==(const Category&) const = default;
  };
  std::vector<Category> categories;
  bool operator==(const MeshFrame&) const = default;
};

inline constexpr char kMeshMagic[4] = {'P', 'T', 'Y', 'M'};

MeshFrame mesh_frame(std::uint64_t frame, std::span<const SurfaceMesh> meshes);
std::vector<std::uint8_t> encode_mesh_frame(const MeshFrame& frame);
/// ParseError for a bad magic, truncation or trailing bytes.
MeshFrame decode_mesh_frame(std::span<const std::uint8_t> bytes);
/// Meshes back from a frame (vertices widened to double).
std::vector<SurfaceMesh> frame_meshes(const MeshFrame& frame);

}  // namespace putty::protocol
