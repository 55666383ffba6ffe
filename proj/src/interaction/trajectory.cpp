#include "putty/interaction/trajectory.hpp"

#include <fstream>
#include <sstream>

#include "putty/core/scene.hpp"

namespace putty {

using nlohmann::json;

const char* hand_name(Hand h) { return h == Hand::Left ? "left" : "right"; }

Hand hand_from_name(const std::string& name) {
  if (name == "left") return Hand::Left;
  if (name == "right") return Hand::Right;
  throw ValidationError("hand", "expected 'left' or 'right', got '" + name + "'");
}

namespace {

json vec_json(const Vec3& v) { return json::array({v(0), v(1), v(2)}); }

Vec3 vec_from(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() || !j[2].is_number())
    throw ValidationError(field, "expected a 3-element number array");
  return Vec3(j[0].get<Real>(), j[1].get<Real>(), j[2].get<Real>());
}

const json& member(const json& j, const char* key, const std::string& field) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(field + "." + key, "missing");
  return j.at(key);
}

template <typename T>
T number(const json& j, const char* key, const std::string& field) {
  const json& v = member(j, key, field);
  if (!v.is_number()) throw ValidationError(field + "." + key, "expected a number");
  return v.get<T>();
}

template <typename T>
T number_or(const json& j, const char* key, T fallback, const std::string& field) {
  return j.contains(key) ? number<T>(j, key, field) : fallback;
}

std::string text(const json& j, const char* key, const std::string& field) {
  const json& v = member(j, key, field);
  if (!v.is_string()) throw ValidationError(field + "." + key, "expected a string");
  return v.get<std::string>();
}

Hand hand_of(const json& j, const std::string& field) {
  try {
    return hand_from_name(text(j, "hand", field));
  } catch (const ValidationError& e) {
    throw ValidationError(field + ".hand", e.what());
  }
}

}  // namespace

json joints_to_json(const JointMap& joints) {
  json j = json::object();
  for (const auto& [name, joint] : joints) {
    const Quat& q = joint.orientation;
    j[name] = {{"p", vec_json(joint.position)}, {"q", {q.w(), q.x(), q.y(), q.z()}}};
  }
  return j;
}

JointMap joints_from_json(const json& j, const std::string& field) {
  if (!j.is_object()) throw ValidationError(field, "expected an object of joints");
  JointMap out;
  for (const auto& [name, value] : j.items()) {
    const std::string f = field + "." + name;
    Joint joint;
    joint.position = vec_from(member(value, "p", f), f + ".p");
    if (value.contains("q")) {
      const auto& q = value.at("q");
      if (!q.is_array() || q.size() != 4) throw ValidationError(f + ".q", "expected [w, x, y, z]");
      joint.orientation = Quat(q[0].get<Real>(), q[1].get<Real>(), q[2].get<Real>(), q[3].get<Real>());
      if (!(joint.orientation.norm() > 0)) throw ValidationError(f + ".q", "zero quaternion");
      joint.orientation.normalize();
    }
    out.emplace(name, joint);
  }
  return out;
}

json edit_to_json(const EditOp& op) {
  return std::visit(
      [](const auto& e) -> json {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, MergeOp>) return {{"op", "merge"}, {"objects", e.objects}, {"unify_categories", e.unify_categories}};
        else if constexpr (std::is_same_v<T, CopyOp>) return {{"op", "copy"}, {"object", e.object}, {"offset", vec_json(e.offset)}};
        else if constexpr (std::is_same_v<T, DeleteOp>) return {{"op", "delete"}, {"object", e.object}};
        else if constexpr (std::is_same_v<T, ResetOp>) return {{"op", "reset"}};
        else if constexpr (std::is_same_v<T, ScaleVisualOp>) return {{"op", "scale_visual"}, {"object", e.object}, {"factor", e.factor}};
        else return {{"op", "move"}, {"object", e.object}, {"offset", vec_json(e.offset)}};
      },
      op);
}

EditOp edit_from_json(const json& j, const std::string& field) {
  const auto op = text(j, "op", field);
  if (op == "merge") {
    MergeOp m;
    const json& ids = member(j, "objects", field);
    if (!ids.is_array()) throw ValidationError(field + ".objects", "expected an array");
    for (const auto& id : ids) m.objects.push_back(id.get<std::uint32_t>());
    m.unify_categories = j.value("unify_categories", false);
    return m;
  }
  if (op == "copy") return CopyOp{number<std::uint32_t>(j, "object", field), vec_from(member(j, "offset", field), field + ".offset")};
  if (op == "delete") return DeleteOp{number<std::uint32_t>(j, "object", field)};
  if (op == "reset") return ResetOp{};
  if (op == "scale_visual") return ScaleVisualOp{number<std::uint32_t>(j, "object", field), number<Real>(j, "factor", field)};
  if (op == "move") return MoveOp{number<std::uint32_t>(j, "object", field), vec_from(member(j, "offset", field), field + ".offset")};
  throw ValidationError(field + ".op", "unknown edit '" + op + "'");
}

json event_to_json(const InputEvent& event) {
  return std::visit(
      [](const auto& e) -> json {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, PinchStart>)
          return {{"type", "pinch_start"}, {"hand", hand_name(e.hand)}, {"position", vec_json(e.position)},
                  {"radius", e.radius}, {"force_ratio", e.force_ratio}};
        else if constexpr (std::is_same_v<T, PinchMove>)
          return {{"type", "pinch_move"}, {"hand", hand_name(e.hand)}, {"position", vec_json(e.position)}};
        else if constexpr (std::is_same_v<T, PinchEnd>) return {{"type", "pinch_end"}, {"hand", hand_name(e.hand)}};
        else if constexpr (std::is_same_v<T, ToolSelect>)
          return {{"type", "tool_select"}, {"hand", hand_name(e.hand)}, {"tool", e.tool}};
        else if constexpr (std::is_same_v<T, EditOp>) {
          json j = edit_to_json(e);
          j["type"] = "edit";
          return j;
        } else
          return {{"type", "material"}, {"object", e.object}, {"material", material_to_json(e.params)}};
      },
      event);
}

InputEvent event_from_json(const json& j, const std::string& field) {
  const auto type = text(j, "type", field);
  if (type == "pinch_start") {
    PinchStart p;
    p.hand = hand_of(j, field);
    p.position = vec_from(member(j, "position", field), field + ".position");
    p.radius = number_or<Real>(j, "radius", p.radius, field);
    p.force_ratio = number_or<Real>(j, "force_ratio", p.force_ratio, field);
    if (!(p.radius > 0)) throw ValidationError(field + ".radius", "must be > 0");
    if (!(p.force_ratio >= 0)) throw ValidationError(field + ".force_ratio", "must be >= 0");
    return p;
  }
  if (type == "pinch_move") return PinchMove{hand_of(j, field), vec_from(member(j, "position", field), field + ".position")};
  if (type == "pinch_end") return PinchEnd{hand_of(j, field)};
  if (type == "tool_select") return ToolSelect{hand_of(j, field), text(j, "tool", field)};
  if (type == "edit") return edit_from_json(j, field);
  if (type == "material") {
    MaterialChange m;
    m.object = number<std::uint32_t>(j, "object", field);
    m.params = material_from_json(member(j, "material", field));
    validate(m.params, field + ".material");
    return m;
  }
  throw ValidationError(field + ".type", "unknown event '" + type + "'");
}

json sample_to_json(const TrajectorySample& s) {
  json j{{"t", s.time}};
  json hands = json::object();
  for (int h = 0; h < 2; ++h)
    if (s.hands[h]) hands[hand_name(static_cast<Hand>(h))] = joints_to_json(*s.hands[h]);
  if (!hands.empty()) j["hands"] = hands;
  if (!s.events.empty()) {
    j["events"] = json::array();
    for (const auto& e : s.events) j["events"].push_back(event_to_json(e));
  }
  return j;
}

TrajectorySample sample_from_json(const json& j, const std::string& field) {
  TrajectorySample s;
  s.time = number<Real>(j, "t", field);
  if (j.contains("hands")) {
    const json& hands = j.at("hands");
    if (!hands.is_object()) throw ValidationError(field + ".hands", "expected an object");
    for (const auto& [name, joints] : hands.items()) {
      Hand h;
      try {
        h = hand_from_name(name);
      } catch (const ValidationError&) {
        throw ValidationError(field + ".hands", "unknown hand '" + name + "'");
      }
      s.hands[static_cast<int>(h)] = joints_from_json(joints, field + ".hands." + name);
    }
  }
  if (j.contains("events")) {
    const json& events = j.at("events");
    if (!events.is_array()) throw ValidationError(field + ".events", "expected an array");
    for (std::size_t i = 0; i < events.size(); ++i)
      s.events.push_back(event_from_json(events[i], field + ".events[" + std::to_string(i) + "]"));
  }
  return s;
}

void validate(const Trajectory& t) {
  std::array<bool, 2> open{false, false};
  for (std::size_t i = 0; i < t.samples.size(); ++i) {
    const auto& s = t.samples[i];
    const std::string f = "samples[" + std::to_string(i) + "]";
    if (!std::isfinite(s.time)) throw ValidationError(f + ".t", "must be finite");
    if (i > 0 && !(s.time > t.samples[i - 1].time)) throw ValidationError(f + ".t", "times must be strictly increasing");
    for (const auto& e : s.events) {
      if (const auto* p = std::get_if<PinchStart>(&e)) {
        if (open[static_cast<int>(p->hand)]) throw ValidationError(f, std::string("pinch_start while the ") + hand_name(p->hand) + " hand is already pinching");
        open[static_cast<int>(p->hand)] = true;
      } else if (const auto* m = std::get_if<PinchMove>(&e)) {
        if (!open[static_cast<int>(m->hand)]) throw ValidationError(f, "pinch_move without a preceding pinch_start on that hand");
      } else if (const auto* en = std::get_if<PinchEnd>(&e)) {
        if (!open[static_cast<int>(en->hand)]) throw ValidationError(f, "pinch_end without a preceding pinch_start on that hand");
        open[static_cast<int>(en->hand)] = false;
      }
    }
  }
}

json trajectory_to_json(const Trajectory& t) {
  json j{{"version", Trajectory::kVersion}, {"samples", json::array()}};
  for (const auto& s : t.samples) j["samples"].push_back(sample_to_json(s));
  return j;
}

Trajectory trajectory_from_json(const json& j) {
  Trajectory t;
  try {
    if (!j.is_object()) throw ValidationError("trajectory", "expected an object");
    const int version = j.value("version", Trajectory::kVersion);
    if (version != Trajectory::kVersion) throw VersionError("trajectory: unsupported version " + std::to_string(version));
    if (j.contains("samples")) {
      const json& samples = j.at("samples");
      if (!samples.is_array()) throw ValidationError("samples", "expected an array");
      for (std::size_t i = 0; i < samples.size(); ++i)
        t.samples.push_back(sample_from_json(samples[i], "samples[" + std::to_string(i) + "]"));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("trajectory: ") + e.what());
  }
  validate(t);
  return t;
}

Trajectory load_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trajectory " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("trajectory: ") + e.what());
  }
  return trajectory_from_json(j);
}

void save_trajectory(const Trajectory& t, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write trajectory " + path.string());
  out << trajectory_to_json(t).dump(1) << '\n';
}

}  // namespace putty
