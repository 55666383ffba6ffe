#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include "putty/collision/medial.hpp"
#include "putty/core/types.hpp"

namespace putty {

using Quat = Eigen::Quaternion<Real>;

struct Joint {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
};

using JointMap = std::map<std::string, Joint>;

/// A medial sphere attached to a pair of joints: its center is
/// lerp(joint_a, joint_b, blend) + R(joint_a) * offset.
struct SphereBinding {
  std::string joint_a;
  std::string joint_b;
  Real blend = 0;
  Vec3 offset = Vec3::Zero();
  Real radius = 0.01;
};

/// Rest description of a hand or tool: bound spheres plus the medial
/// primitives connecting them.
struct RigTemplate {
  std::string name;
  std::vector<SphereBinding> spheres;
  std::vector<int> lone_spheres;
  std::vector<std::array<int, 2>> cones;
  std::vector<std::array<int, 3>> slabs;

  std::size_t primitive_count() const { return lone_spheres.size() + cones.size() + slabs.size(); }
  /// Joint names referenced by the bindings.
  std::vector<std::string> joints() const;
};

/// A posed rig: world-space spheres with velocities.
struct MedialRig {
  std::string name;
  std::vector<MedialSphere<Real>> spheres;
  std::vector<int> lone_spheres;
  std::vector<std::array<int, 2>> cones;
  std::vector<std::array<int, 3>> slabs;

  std::vector<MedialPrimitive> primitives() const;
  /// Mean of primitive control-sphere centers.
  Vec3 centroid() const;
};

/// Throws ValidationError on out-of-range indices, non-positive radii or
/// coincident control spheres.
void validate(const RigTemplate& rig);

RigTemplate rig_from_json(const nlohmann::json& j);
nlohmann::json rig_to_json(const RigTemplate& rig);
RigTemplate load_rig(const std::filesystem::path& path);
void save_rig(const RigTemplate& rig, const std::filesystem::path& path);

// Procedurally authored rigs. Tools bind to the "palm" joint; the hand binds
// to the joints listed by hand_joint_names().
RigTemplate make_plate_rig(Real half_width = 0.06, Real half_length = 0.08, Real thickness = 0.006);
RigTemplate make_rod_rig(Real length = 0.16, Real radius = 0.01);
RigTemplate make_cone_rig(Real length = 0.12, Real tip_radius = 0.004, Real base_radius = 0.025);
RigTemplate make_scissors_rig(Real blade_length = 0.12, Real opening_degrees = 20);
RigTemplate make_hand_rig(Real scale = 1);
/// "hand", "plate", "rod", "cone", "scissors"; throws ValidationError otherwise.
RigTemplate make_builtin_rig(const std::string& name);

const std::vector<std::string>& hand_joint_names();
/// Rest pose of the articulated hand: palm facing -y, fingers along +z,
/// placed with its palm joint at `palm` and rotated by `orientation`.
JointMap default_hand_pose(const Vec3& palm, const Quat& orientation = Quat::Identity(), Real scale = 1,
                           const std::string& prefix = "");

}  // namespace putty
