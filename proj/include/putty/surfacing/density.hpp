#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "putty/core/scene.hpp"
#include "putty/core/types.hpp"
#include "putty/surfacing/mesh.hpp"

namespace putty {

/// Nodal scalar field over a box of surfacing-grid nodes. Node (i, j, k) of
/// the box sits at (lo + (i, j, k)) h.
struct DensityField {
  std::uint32_t category = 0;
  Real h = 1;
  Vec3i lo = Vec3i::Zero();
  Vec3i dims = Vec3i::Zero();
  std::vector<Real> values;

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims.y() + j) * dims.x() + i;
  }
  Real at(int i, int j, int k) const { return values[index(i, j, k)]; }
  Vec3 node_position(int i, int j, int k) const { return (lo + Vec3i(i, j, k)).cast<Real>() * h; }
  Real sum() const;
};

/// One field per category, sorted by category id.
struct CategoryDensityFields {
  Real h = 1;
  std::vector<DensityField> fields;

  const DensityField* find(std::uint32_t category) const;
  /// 0.3 x the mean of all nonzero nodal values (0 when every field is empty).
  Real default_iso() const;
};

/// Splats m_p / h^3 of every particle into its category's field with the
/// quadratic B-spline on a grid of spacing domain_side / resolution. Each
/// box carries one empty node layer, so isosurfaces close.
CategoryDensityFields accumulate_density(const ParticleSet& particles, Real domain_side, int resolution);

/// Marching cubes over the field's cells. Vertices on shared cell edges are
/// shared; triangles face away from the region where value >= iso.
SurfaceMesh marching_cubes(const DensityField& field, Real iso);

/// One mesh per category field (empty ones dropped), sorted by category.
std::vector<SurfaceMesh> extract_surfaces(const CategoryDensityFields& fields, Real iso);

/// accumulate -> iso (configured or default) -> extract -> smooth.
std::vector<SurfaceMesh> surface_particles(const ParticleSet& particles, Real domain_side, const SurfacingParams& params);

}  // namespace putty
