#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "putty/core/types.hpp"

namespace putty {

using Triangle = std::array<std::uint32_t, 3>;

struct SurfaceMesh {
  std::uint32_t category = 0;
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;

  bool empty() const { return triangles.empty(); }
  bool operator==(const SurfaceMesh&) const = default;
};

/// Edge incidence summary of a triangle mesh.
struct MeshTopology {
  std::size_t vertices = 0;  // referenced by at least one triangle
  std::size_t edges = 0;
  std::size_t faces = 0;
  std::size_t boundary_edges = 0;      // one incident triangle
  std::size_t nonmanifold_edges = 0;   // three or more
  std::size_t components = 0;
  long euler() const { return static_cast<long>(vertices) - static_cast<long>(edges) + static_cast<long>(faces); }
  bool closed_manifold() const { return boundary_edges == 0 && nonmanifold_edges == 0; }
};

MeshTopology analyze_topology(const SurfaceMesh& mesh);

Real surface_area(const SurfaceMesh& mesh);
/// Divergence-theorem volume; positive for outward-facing triangles.
Real enclosed_volume(const SurfaceMesh& mesh);
/// Smallest triangle area in the mesh (0 when empty).
Real min_triangle_area(const SurfaceMesh& mesh);

/// Umbrella Laplacian: v += strength (mean of edge neighbors - v), repeated.
/// Connectivity is untouched; vertices without neighbors stay put.
SurfaceMesh laplacian_smooth(SurfaceMesh mesh, int iterations = 5, Real strength = 0.5);

}  // namespace putty
