#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "putty/collision/medial.hpp"
#include "putty/core/scene.hpp"
#include "putty/core/types.hpp"

namespace putty {

/// Uniform hash over primitive bounding boxes. Each primitive is registered
/// in every cell its inflated box overlaps; queries scan the 3x3x3 cell
/// neighborhood of the query point.
class SpatialHash {
 public:
  SpatialHash() = default;
  SpatialHash(std::span<const MedialPrimitive> primitives, Real inflate);

  Real cell_size() const noexcept { return cell_; }
  Real inflation() const noexcept { return inflate_; }
  bool empty() const noexcept { return cells_.empty(); }

  Vec3i cell_of(const Vec3& p) const;
  /// Primitives registered in one cell, or nullptr.
  const std::vector<int>* cell(const Vec3i& c) const;
  /// Deduplicated, sorted primitive indices near p.
  void candidates(const Vec3& p, std::vector<int>& out) const;

 private:
  static std::uint64_t key(const Vec3i& c);

  Real cell_ = 1;
  Real inflate_ = 0;
  std::unordered_map<std::uint64_t, std::vector<int>> cells_;
};

/// Posed tool geometry for one frame plus contact parameters.
class ContactWorld {
 public:
  ContactWorld() = default;
  ContactWorld(std::vector<MedialPrimitive> primitives, ContactParams params, Real inflate);

  bool empty() const noexcept { return primitives_.empty(); }
  const std::vector<MedialPrimitive>& primitives() const noexcept { return primitives_; }
  const SpatialHash& hash() const noexcept { return hash_; }
  const ContactParams& params() const noexcept { return params_; }

  /// Hash-accelerated query; exact within the inflation distance, +inf when
  /// no primitive is that close.
  SdfQueryResult query(const Vec3& p) const;
  /// Minimum over every primitive, no acceleration.
  SdfQueryResult query_exhaustive(const Vec3& p) const;

 private:
  std::vector<MedialPrimitive> primitives_;
  ContactParams params_;
  SpatialHash hash_;
  Vec3 lo_ = Vec3::Zero(), hi_ = Vec3::Zero();
};

/// Pressure and friction impulses on grid nodes inside tool geometry. Grid
/// must hold velocities. Only nodes in `box` with positive mass are touched.
void apply_boundary_forces(Grid& grid, const ContactWorld& world, Real dt, const NodeBox& box);

/// Single-node form of the grid-level contact response.
Vec3 contact_velocity(const Vec3& velocity, const SdfQueryResult& sdf, const ContactParams& params, Real dt);

struct ProjectionStats {
  std::size_t projected = 0;
  Real max_penetration = 0;  // after projection, >= 0
};

/// Moves points that ended up inside tool geometry to the closest boundary
/// point and assigns the boundary velocity.
ProjectionStats adjust_points(std::vector<Vec3>& x, std::vector<Vec3>& v, std::span<const std::uint32_t> indices,
                              const ContactWorld& world);

ProjectionStats adjust_particles(ParticleSet& particles, std::span<const std::uint32_t> indices,
                                 const ContactWorld& world);

/// Largest penetration depth (>= 0) of the listed points.
Real max_penetration(std::span<const Vec3> x, const ContactWorld& world);

}  // namespace putty
