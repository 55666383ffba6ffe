#include "putty/collision/rig.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace putty {

using nlohmann::json;

std::vector<std::string> RigTemplate::joints() const {
  std::set<std::string> names;
  for (const auto& s : spheres) {
    names.insert(s.joint_a);
    names.insert(s.joint_b);
  }
  return {names.begin(), names.end()};
}

std::vector<MedialPrimitive> MedialRig::primitives() const {
  std::vector<MedialPrimitive> out;
  out.reserve(lone_spheres.size() + cones.size() + slabs.size());
  for (int s : lone_spheres) out.emplace_back(SphereShape<Real>{spheres[s]});
  for (const auto& c : cones) out.emplace_back(ConeShape<Real>{{spheres[c[0]], spheres[c[1]]}});
  for (const auto& s : slabs) out.emplace_back(SlabShape<Real>{{spheres[s[0]], spheres[s[1]], spheres[s[2]]}});
  return out;
}

Vec3 MedialRig::centroid() const {
  Vec3 sum = Vec3::Zero();
  std::size_t count = 0;
  for (const auto& prim : primitives())
    for (const auto& s : control_spheres(prim)) {
      sum += s.center;
      ++count;
    }
  return count ? Vec3(sum / static_cast<Real>(count)) : Vec3::Zero();
}

void validate(const RigTemplate& rig) {
  const int n = static_cast<int>(rig.spheres.size());
  const std::string f = "rig '" + rig.name + "'";
  for (int i = 0; i < n; ++i)
    if (!(rig.spheres[i].radius > 0)) throw ValidationError(f + ".spheres[" + std::to_string(i) + "]", "radius must be > 0");
  auto check = [&](int idx) {
    if (idx < 0 || idx >= n) throw ValidationError(f, "sphere index " + std::to_string(idx) + " out of range");
  };
  auto distinct = [&](int a, int b) {
    const auto& sa = rig.spheres[a];
    const auto& sb = rig.spheres[b];
    if (sa.joint_a == sb.joint_a && sa.joint_b == sb.joint_b && sa.blend == sb.blend && sa.offset == sb.offset)
      throw ValidationError(f, "primitive control spheres " + std::to_string(a) + " and " + std::to_string(b) + " coincide");
  };
  for (int s : rig.lone_spheres) check(s);
  for (const auto& c : rig.cones) {
    check(c[0]);
    check(c[1]);
    distinct(c[0], c[1]);
  }
  for (const auto& s : rig.slabs) {
    for (int i : s) check(i);
    distinct(s[0], s[1]);
    distinct(s[1], s[2]);
    distinct(s[0], s[2]);
  }
}

// ---------------------------------------------------------------------------
// Rig description files

RigTemplate rig_from_json(const json& j) {
  RigTemplate rig;
  try {
    if (j.value("version", 1) != 1) throw VersionError("rig: unsupported version");
    rig.name = j.value("name", std::string("rig"));
    for (const auto& s : j.at("spheres")) {
      SphereBinding b;
      const auto& joints = s.at("joints");
      b.joint_a = joints.at(0).get<std::string>();
      b.joint_b = joints.size() > 1 ? joints.at(1).get<std::string>() : b.joint_a;
      b.blend = s.value("blend", 0.0);
      if (s.contains("offset")) {
        const auto& o = s.at("offset");
        b.offset = Vec3(o.at(0).get<Real>(), o.at(1).get<Real>(), o.at(2).get<Real>());
      }
      b.radius = s.at("radius").get<Real>();
      rig.spheres.push_back(b);
    }
    if (j.contains("lone_spheres")) rig.lone_spheres = j.at("lone_spheres").get<std::vector<int>>();
    if (j.contains("cones")) rig.cones = j.at("cones").get<std::vector<std::array<int, 2>>>();
    if (j.contains("slabs")) rig.slabs = j.at("slabs").get<std::vector<std::array<int, 3>>>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("rig: ") + e.what());
  }
  validate(rig);
  return rig;
}

json rig_to_json(const RigTemplate& rig) {
  json j{{"version", 1}, {"name", rig.name}, {"spheres", json::array()}};
  for (const auto& s : rig.spheres)
    j["spheres"].push_back({{"joints", {s.joint_a, s.joint_b}},
                            {"blend", s.blend},
                            {"offset", {s.offset(0), s.offset(1), s.offset(2)}},
                            {"radius", s.radius}});
  j["lone_spheres"] = rig.lone_spheres;
  j["cones"] = rig.cones;
  j["slabs"] = rig.slabs;
  return j;
}

RigTemplate load_rig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open rig file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return rig_from_json(json::parse(ss.str()));
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("rig: ") + e.what());
  }
}

void save_rig(const RigTemplate& rig, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write rig file " + path.string());
  out << rig_to_json(rig).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Procedural rigs

namespace {

SphereBinding at_palm(const Vec3& offset, Real radius) { return {"palm", "palm", 0, offset, radius}; }

struct HandJointSpec {
  const char* name;
  Vec3 rest;
  Real radius;
};

const std::vector<HandJointSpec>& hand_spec() {
  static const std::vector<HandJointSpec> spec{
      {"wrist", {0.0, 0.0, -0.05}, 0.022},       {"palm", {0.0, 0.0, 0.0}, 0.02},
      {"thumb_1", {0.035, 0.0, -0.03}, 0.013},   {"thumb_2", {0.06, 0.0, 0.0}, 0.011},
      {"thumb_tip", {0.075, 0.0, 0.025}, 0.009}, {"index_1", {0.03, 0.0, 0.05}, 0.011},
      {"index_2", {0.032, 0.0, 0.085}, 0.01},    {"index_tip", {0.034, 0.0, 0.11}, 0.008},
      {"middle_1", {0.01, 0.0, 0.055}, 0.011},   {"middle_2", {0.01, 0.0, 0.095}, 0.01},
      {"middle_tip", {0.01, 0.0, 0.125}, 0.008}, {"ring_1", {-0.01, 0.0, 0.05}, 0.011},
      {"ring_2", {-0.011, 0.0, 0.088}, 0.01},    {"ring_tip", {-0.012, 0.0, 0.115}, 0.008},
      {"pinky_1", {-0.03, 0.0, 0.04}, 0.01},     {"pinky_2", {-0.033, 0.0, 0.068}, 0.009},
      {"pinky_tip", {-0.035, 0.0, 0.09}, 0.007},
  };
  return spec;
}

}  // namespace

const std::vector<std::string>& hand_joint_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& j : hand_spec()) out.emplace_back(j.name);
    return out;
  }();
  return names;
}

JointMap default_hand_pose(const Vec3& palm, const Quat& orientation, Real scale, const std::string& prefix) {
  JointMap joints;
  for (const auto& j : hand_spec())
    joints[prefix + j.name] = Joint{palm + orientation * (scale * j.rest), orientation};
  return joints;
}

RigTemplate make_hand_rig(Real scale) {
  RigTemplate rig;
  rig.name = "hand";
  const auto& spec = hand_spec();
  auto index_of = [&](std::string_view n) {
    for (std::size_t i = 0; i < spec.size(); ++i)
      if (n == spec[i].name) return static_cast<int>(i);
    return -1;
  };
  for (const auto& j : spec) rig.spheres.push_back({j.name, j.name, 0, Vec3::Zero(), scale * j.radius});
  for (const char* finger : {"thumb", "index", "middle", "ring", "pinky"}) {
    const std::string f = finger;
    rig.cones.push_back({index_of(f + "_1"), index_of(f + "_2")});
    rig.cones.push_back({index_of(f + "_2"), index_of(f + "_tip")});
  }
  rig.cones.push_back({index_of("wrist"), index_of("thumb_1")});
  rig.slabs.push_back({index_of("wrist"), index_of("index_1"), index_of("middle_1")});
  rig.slabs.push_back({index_of("wrist"), index_of("middle_1"), index_of("ring_1")});
  rig.slabs.push_back({index_of("wrist"), index_of("ring_1"), index_of("pinky_1")});
  rig.slabs.push_back({index_of("index_1"), index_of("middle_1"), index_of("palm")});
  return rig;
}

RigTemplate make_plate_rig(Real half_width, Real half_length, Real thickness) {
  RigTemplate rig;
  rig.name = "plate";
  const Real y = -0.03;
  rig.spheres = {at_palm({-half_width, y, -half_length}, thickness), at_palm({half_width, y, -half_length}, thickness),
                 at_palm({half_width, y, half_length}, thickness), at_palm({-half_width, y, half_length}, thickness)};
  rig.slabs = {{0, 1, 2}, {0, 2, 3}};
  return rig;
}

RigTemplate make_rod_rig(Real length, Real radius) {
  RigTemplate rig;
  rig.name = "rod";
  rig.spheres = {at_palm({0, -0.025, 0}, radius), at_palm({0, -0.025, length}, radius)};
  rig.cones = {{0, 1}};
  return rig;
}

RigTemplate make_cone_rig(Real length, Real tip_radius, Real base_radius) {
  RigTemplate rig;
  rig.name = "cone";
  rig.spheres = {at_palm({0, -0.03, 0}, base_radius), at_palm({0, -0.03, length}, tip_radius)};
  rig.cones = {{0, 1}};
  return rig;
}

RigTemplate make_scissors_rig(Real blade_length, Real opening_degrees) {
  RigTemplate rig;
  rig.name = "scissors";
  const Real half = opening_degrees * std::numbers::pi / 360.0;
  const Real y = -0.03;
  rig.spheres.push_back(at_palm({0, y, 0}, 0.006));
  for (Real sign : {1.0, -1.0}) {
    const Vec3 dir(sign * std::sin(half), 0, std::cos(half));
    const int base = static_cast<int>(rig.spheres.size());
    rig.spheres.push_back(at_palm(Vec3(0, y, 0) + blade_length * dir, 0.002));
    rig.spheres.push_back(at_palm(Vec3(0, y + 0.02, 0) + 0.5 * blade_length * dir, 0.003));
    rig.slabs.push_back({0, base, base + 1});
  }
  return rig;
}

RigTemplate make_builtin_rig(const std::string& name) {
  if (name == "hand") return make_hand_rig();
  if (name == "plate") return make_plate_rig();
  if (name == "rod") return make_rod_rig();
  if (name == "cone") return make_cone_rig();
  if (name == "scissors") return make_scissors_rig();
  throw ValidationError("tool", "unknown tool '" + name + "'");
}

}  // namespace putty
