#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "putty/core/types.hpp"

namespace putty {

enum class ShapeKind { Sphere, Box, Torus, Cylinder };

/// Analytic initial shape. Interpretation of the size fields per kind:
///   Sphere   radius
///   Box      half_extents
///   Torus    radius (major), minor_radius, axis along y
///   Cylinder radius, half_height, axis along y
struct ShapeSpec {
  ShapeKind kind = ShapeKind::Sphere;
  Vec3 center = Vec3::Constant(0.5);
  Real radius = 0.3;
  Real minor_radius = 0.1;
  Real half_height = 0.2;
  Vec3 half_extents = Vec3::Constant(0.1);
  std::uint16_t material = 0;
  std::uint32_t category = 0;

  bool contains(const Vec3& p) const;
  /// Axis-aligned bounds as (min, max).
  std::pair<Vec3, Vec3> bounds() const;
};

enum class WallCondition { Slip, Sticky };

struct ContactParams {
  Real pressure_stiffness = 1e4;  // k_p, 1/s^2
  Real friction = 0.4;            // mu_f
};

struct SurfacingParams {
  int resolution = 128;
  std::optional<Real> iso;  // default: 0.3 x mean nonzero density
  int smoothing_iterations = 5;
  Real smoothing_strength = 0.5;
  int cadence = 2;  // frames between surface extractions in a live session
};

struct LocalizedParams {
  bool enabled = false;
  Real half_side = 0.125;
};

struct SceneConfig {
  Real domain_side = 1;
  int grid_resolution = 64;
  int particles_per_cell = 8;
  int substeps_per_frame = 5;
  Real dt = 1e-4;
  Real frame_interval = 1.0 / 60.0;  // input-clock seconds per frame
  Vec3 gravity = Vec3::Zero();
  Real damping = 2.0;
  WallCondition walls = WallCondition::Slip;
  std::uint64_t seed = 0;
  std::vector<MaterialParams> materials{MaterialParams{}};
  std::vector<ShapeSpec> shapes;
  ContactParams contact;
  SurfacingParams surfacing;
  LocalizedParams localized;
  std::string left_tool = "hand";
  std::string right_tool = "hand";

  Real dx() const { return domain_side / grid_resolution; }
  Real frame_dt() const { return dt * substeps_per_frame; }
};

/// Default per-substep time step: 1e-4 s at grid 64, proportional to dx.
Real default_dt(int grid_resolution, Real domain_side = 1);

/// Validates every field; throws ValidationError naming the first bad one.
void validate(const SceneConfig& config);

SceneConfig scene_from_json(const nlohmann::json& j);
nlohmann::json scene_to_json(const SceneConfig& config);

/// Parses a scene file. Throws ParseError on malformed text and
/// ValidationError on out-of-range values.
SceneConfig load_scene(const std::filesystem::path& path);
SceneConfig parse_scene(const std::string& text);

MaterialParams material_from_json(const nlohmann::json& j);
nlohmann::json material_to_json(const MaterialParams& m);

/// Fills a particle set with `particles_per_cell` jittered samples in every
/// cell overlapped by a shape. Pure function of (config, config.seed).
ParticleSet seed_particles(const SceneConfig& config);

/// Valid particle position range [lo, hi] per axis for a grid: keeps the
/// quadratic stencil inside the node array.
std::pair<Real, Real> particle_bounds(int grid_resolution, Real dx);

}  // namespace putty
