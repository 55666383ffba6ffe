#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "putty/collision/rig.hpp"
#include "putty/core/types.hpp"

namespace putty {

enum class Hand : std::uint8_t { Left = 0, Right = 1 };
const char* hand_name(Hand h);
Hand hand_from_name(const std::string& name);

struct PinchStart {
  Hand hand = Hand::Right;
  Vec3 position = Vec3::Zero();
  Real radius = 0.08;
  Real force_ratio = 1;
};
struct PinchMove {
  Hand hand = Hand::Right;
  Vec3 position = Vec3::Zero();
};
struct PinchEnd {
  Hand hand = Hand::Right;
};
struct ToolSelect {
  Hand hand = Hand::Right;
  std::string tool;
};

struct MergeOp {
  std::vector<std::uint32_t> objects;
  bool unify_categories = false;
};
struct CopyOp {
  std::uint32_t object = 0;
  Vec3 offset = Vec3::Zero();
};
struct DeleteOp {
  std::uint32_t object = 0;
};
struct ResetOp {};
struct ScaleVisualOp {
  std::uint32_t object = 0;
  Real factor = 1;
};
struct MoveOp {
  std::uint32_t object = 0;
  Vec3 offset = Vec3::Zero();
};
using EditOp = std::variant<MergeOp, CopyOp, DeleteOp, ResetOp, ScaleVisualOp, MoveOp>;

struct MaterialChange {
  std::uint32_t object = 0;
  MaterialParams params;
};

using InputEvent = std::variant<PinchStart, PinchMove, PinchEnd, ToolSelect, EditOp, MaterialChange>;

/// One tracking sample: optional joint sets per hand and the events that
/// arrived with it.
struct TrajectorySample {
  Real time = 0;
  std::array<std::optional<JointMap>, 2> hands;
  std::vector<InputEvent> events;
};

struct Trajectory {
  static constexpr int kVersion = 1;
  std::vector<TrajectorySample> samples;
};

/// Throws ValidationError on non-increasing times or pinch events without an
/// open selection on the same hand.
void validate(const Trajectory& trajectory);

nlohmann::json joints_to_json(const JointMap& joints);
JointMap joints_from_json(const nlohmann::json& j, const std::string& field);
nlohmann::json event_to_json(const InputEvent& e);
InputEvent event_from_json(const nlohmann::json& j, const std::string& field);
nlohmann::json edit_to_json(const EditOp& op);
EditOp edit_from_json(const nlohmann::json& j, const std::string& field);
nlohmann::json sample_to_json(const TrajectorySample& s);
TrajectorySample sample_from_json(const nlohmann::json& j, const std::string& field);

nlohmann::json trajectory_to_json(const Trajectory& t);
/// Parses and validates. ParseError / VersionError / ValidationError.
Trajectory trajectory_from_json(const nlohmann::json& j);
Trajectory load_trajectory(const std::filesystem::path& path);
void save_trajectory(const Trajectory& t, const std::filesystem::path& path);

}  // namespace putty
