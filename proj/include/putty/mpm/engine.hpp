#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "putty/collision/contact.hpp"
#include "putty/core/scene.hpp"
#include "putty/core/types.hpp"

namespace putty {

/// Cubic simulation window around the tools.
struct ActiveRegion {
  Vec3 center = Vec3::Constant(0.5);
  Real half_side = 0.125;
};

/// Node range covered by a region, clamped to the grid.
NodeBox region_nodes(const ActiveRegion& region, const Grid& grid);
NodeBox full_nodes(const Grid& grid);

/// Positions whose transfer stencil stays inside `box` with one cell of
/// margin: [(lo + 1) dx, (hi - 1) dx] per axis.
std::pair<Vec3, Vec3> position_range(const NodeBox& box, Real dx);

/// Region centered on the mean of the posed rigs' primitive centers.
ActiveRegion update_active_region(std::span<const Vec3> rig_centroids, Real half_side, Real domain_side);

/// Marks particles whose transfer stencil lies inside `box` active and
/// freezes the rest (v = 0, C = 0). Returns the active indices in order.
std::vector<std::uint32_t> set_particle_activity(ParticleSet& particles, const NodeBox& box, const Grid& grid);

struct GridUpdateSettings {
  Real dt = 1e-4;
  Vec3 gravity = Vec3::Zero();
  Real damping = 0;
  WallCondition walls = WallCondition::Slip;
  int wall_nodes = 2;  // node layers on each domain face treated as walls
};

/// Scatters mass and APIC/MLS momentum (with the fused stress term) of the
/// listed particles. Optional per-particle external forces go to grid.force.
/// Throws Error naming the particle on non-finite stress.
void particle_to_grid(const ParticleSet& particles, Grid& grid, std::span<const MaterialParams> materials, Real dt,
                      std::span<const std::uint32_t> indices, std::span<const Vec3> particle_forces = {});

/// Momentum -> velocity, damping, gravity and external forces, tool contact,
/// domain walls, and Sticky region borders (where the box is interior).
void update_grid(Grid& grid, const GridUpdateSettings& settings, const NodeBox& box,
                 const ContactWorld* contact = nullptr);

/// Velocity and affine gather, position advection and F <- (I + dt C) F.
/// Particles leaving the valid range are clamped; returns how many were.
std::size_t grid_to_particle(ParticleSet& particles, const Grid& grid, Real dt, std::span<const std::uint32_t> indices);

/// Gathers v = sum w v_i and C = 4/dx^2 sum w v_i (x_i - x)^T at one point.
void gather_velocity(const Grid& grid, const Vec3& x, Vec3& v, Mat3& C);

void apply_plasticity(ParticleSet& particles, std::span<const MaterialParams> materials,
                      std::span<const std::uint32_t> indices);

struct PhaseTimes {
  double p2g = 0, grid = 0, g2p = 0, adjust = 0, plasticity = 0;
  double total() const { return p2g + grid + g2p + adjust + plasticity; }
  PhaseTimes& operator+=(const PhaseTimes& o);
};

struct SubstepReport {
  std::size_t clamped = 0;
  ProjectionStats projection;
};

/// Owns the background grid and the active-set bookkeeping for one scene.
class MpmSolver {
 public:
  MpmSolver(const SceneConfig& config);

  const Grid& grid() const noexcept { return grid_; }
  const NodeBox& node_box() const noexcept { return box_; }
  const std::vector<std::uint32_t>& active_indices() const noexcept { return active_; }
  std::optional<ActiveRegion> region() const noexcept { return region_; }
  const std::vector<MaterialParams>& materials() const noexcept { return materials_; }
  std::vector<MaterialParams>& materials() noexcept { return materials_; }
  GridUpdateSettings& settings() noexcept { return settings_; }

  /// Simulates every particle. Must be re-called after particles are added
  /// or removed.
  void set_full(ParticleSet& particles);
  void set_region(ParticleSet& particles, const ActiveRegion& region);

  /// One MLS-MPM substep over the active set: P2G, grid update, G2P,
  /// particle projection, plasticity. Errors carry the phase name.
  SubstepReport substep(ParticleSet& particles, const ContactWorld* contact = nullptr,
                        std::span<const Vec3> particle_forces = {}, PhaseTimes* times = nullptr);

 private:
  Grid grid_;
  std::vector<MaterialParams> materials_;
  GridUpdateSettings settings_;
  NodeBox box_;
  std::optional<ActiveRegion> region_;
  std::vector<std::uint32_t> active_;
  bool forces_dirty_ = false;
};

}  // namespace putty
