#include "putty/surfacing/mesh.hpp"

#include <algorithm>
#include <numeric>

#include <Eigen/Geometry>

namespace putty {

namespace {

std::size_t find_root(std::vector<std::uint32_t>& parent, std::uint32_t v) {
  while (parent[v] != v) {
    parent[v] = parent[parent[v]];
    v = parent[v];
  }
  return v;
}

}  // namespace

MeshTopology analyze_topology(const SurfaceMesh& mesh) {
  MeshTopology t;
  t.faces = mesh.triangles.size();
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  edges.reserve(3 * t.faces);
  std::vector<std::uint32_t> parent(mesh.vertices.size());
  std::iota(parent.begin(), parent.end(), 0u);
  std::vector<char> used(mesh.vertices.size(), 0);
  for (const auto& tri : mesh.triangles)
    for (int e = 0; e < 3; ++e) {
      const auto a = tri[e], b = tri[(e + 1) % 3];
      edges.emplace_back(std::min(a, b), std::max(a, b));
      used[a] = 1;
      parent[find_root(parent, a)] = static_cast<std::uint32_t>(find_root(parent, b));
    }
  std::sort(edges.begin(), edges.end());
  for (std::size_t i = 0; i < edges.size();) {
    std::size_t j = i;
    while (j < edges.size() && edges[j] == edges[i]) ++j;
    ++t.edges;
    if (j - i == 1) ++t.boundary_edges;
    if (j - i > 2) ++t.nonmanifold_edges;
    i = j;
  }
  for (std::uint32_t v = 0; v < used.size(); ++v)
    if (used[v]) {
      ++t.vertices;
      if (find_root(parent, v) == v) ++t.components;
    }
  return t;
}

Real surface_area(const SurfaceMesh& mesh) {
  Real a = 0;
  for (const auto& t : mesh.triangles)
    a += (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]).norm() / 2;
  return a;
}

Real enclosed_volume(const SurfaceMesh& mesh) {
  Real v = 0;
  for (const auto& t : mesh.triangles) v += mesh.vertices[t[0]].dot(mesh.vertices[t[1]].cross(mesh.vertices[t[2]])) / 6;
  return v;
}

Real min_triangle_area(const SurfaceMesh& mesh) {
  if (mesh.triangles.empty()) return 0;
  Real a = std::numeric_limits<Real>::infinity();
  for (const auto& t : mesh.triangles)
    a = std::min(a, (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]).norm() / 2);
  return a;
}

SurfaceMesh laplacian_smooth(SurfaceMesh mesh, int iterations, Real strength) {
  if (iterations <= 0 || mesh.triangles.empty()) return mesh;
  const std::size_t n = mesh.vertices.size();
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  for (const auto& t : mesh.triangles)
    for (int e = 0; e < 3; ++e) {
      pairs.emplace_back(t[e], t[(e + 1) % 3]);
      pairs.emplace_back(t[(e + 1) % 3], t[e]);
    }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  std::vector<std::size_t> start(n + 1, 0);
  for (const auto& p : pairs) ++start[p.first + 1];
  std::partial_sum(start.begin(), start.end(), start.begin());

  std::vector<Vec3> next(n);
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t v = 0; v < n; ++v) {
      const std::size_t count = start[v + 1] - start[v];
      if (count == 0) {
        next[v] = mesh.vertices[v];
        continue;
      }
      Vec3 mean = Vec3::Zero();
      for (std::size_t k = start[v]; k < start[v + 1]; ++k) mean += mesh.vertices[pairs[k].second];
      mean /= static_cast<Real>(count);
      next[v] = mesh.vertices[v] + strength * (mean - mesh.vertices[v]);
    }
    mesh.vertices.swap(next);
  }
  return mesh;
}

}  // namespace putty
