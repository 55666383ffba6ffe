#include "putty/surfacing/density.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <unordered_map>

#include "mc_tables.hpp"
#include "putty/core/kernel.hpp"

namespace putty {

Real DensityField::sum() const { return std::accumulate(values.begin(), values.end(), Real(0)); }

const DensityField* CategoryDensityFields::find(std::uint32_t category) const {
  for (const auto& f : fields)
    if (f.category == category) return &f;
  return nullptr;
}

Real CategoryDensityFields::default_iso() const {
  Real sum = 0;
  std::size_t count = 0;
  for (const auto& f : fields)
    for (Real v : f.values)
      if (v > 0) {
        sum += v;
        ++count;
      }
  return count ? Real(0.3) * sum / static_cast<Real>(count) : Real(0);
}

CategoryDensityFields accumulate_density(const ParticleSet& particles, Real domain_side, int resolution) {
  if (resolution < 1 || !(domain_side > 0)) throw ValidationError("surfacing.resolution", "must be >= 1");
  CategoryDensityFields out;
  out.h = domain_side / resolution;
  const Real inv_h = 1 / out.h;
  const Real inv_h3 = inv_h * inv_h * inv_h;

  struct Bounds {
    Vec3i lo = Vec3i::Constant(std::numeric_limits<int>::max());
    Vec3i hi = Vec3i::Constant(std::numeric_limits<int>::min());
  };
  std::map<std::uint32_t, Bounds> bounds;
  for (std::size_t p = 0; p < particles.size(); ++p) {
    const auto base = quadratic_stencil(particles.x[p], inv_h).base;
    auto& b = bounds[particles.category[p]];
    b.lo = b.lo.cwiseMin(base);
    b.hi = b.hi.cwiseMax(base);
  }
  std::map<std::uint32_t, std::size_t> slot;
  for (const auto& [cat, b] : bounds) {
    DensityField f;
    f.category = cat;
    f.h = out.h;
    f.lo = b.lo - Vec3i::Ones();  // one empty layer below the stencils
    f.dims = (b.hi + Vec3i::Constant(3)) - f.lo + Vec3i::Ones();
    f.values.assign(static_cast<std::size_t>(f.dims.prod()), 0);
    slot[cat] = out.fields.size();
    out.fields.push_back(std::move(f));
  }
  for (std::size_t p = 0; p < particles.size(); ++p) {
    auto& f = out.fields[slot[particles.category[p]]];
    const auto st = quadratic_stencil(particles.x[p], inv_h);
    const Vec3i o = st.base - f.lo;
    const Real rho = particles.mass[p] * inv_h3;
    for (int c = 0; c < 3; ++c)
      for (int b = 0; b < 3; ++b)
        for (int a = 0; a < 3; ++a) f.values[f.index(o.x() + a, o.y() + b, o.z() + c)] += st.weight(a, b, c) * rho;
  }
  return out;
}

namespace {

constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};

}  // namespace

SurfaceMesh marching_cubes(const DensityField& field, Real iso) {
  SurfaceMesh mesh;
  mesh.category = field.category;
  const Vec3i& n = field.dims;
  if (n.minCoeff() < 2) return mesh;

  // vertex per crossed grid edge, keyed by (lower node, axis)
  std::unordered_map<std::uint64_t, std::uint32_t> edge_vertex;
  auto vertex_on = [&](int i, int j, int k, int c0, int c1) -> std::uint32_t {
    Vec3i p0(i + kCorner[c0][0], j + kCorner[c0][1], k + kCorner[c0][2]);
    Vec3i p1(i + kCorner[c1][0], j + kCorner[c1][1], k + kCorner[c1][2]);
    if ((p1 - p0).sum() < 0) std::swap(p0, p1);
    const int axis = p1.x() != p0.x() ? 0 : (p1.y() != p0.y() ? 1 : 2);
    const std::uint64_t key = field.index(p0.x(), p0.y(), p0.z()) * 3 + axis;
    const auto [it, inserted] = edge_vertex.try_emplace(key, static_cast<std::uint32_t>(mesh.vertices.size()));
    if (inserted) {
      const Real v0 = field.at(p0.x(), p0.y(), p0.z());
      const Real v1 = field.at(p1.x(), p1.y(), p1.z());
      // keep vertices off the nodes so no triangle collapses
      const Real t = std::clamp((iso - v0) / (v1 - v0), Real(1e-6), Real(1 - 1e-6));
      mesh.vertices.push_back(field.node_position(p0.x(), p0.y(), p0.z()) * (1 - t) +
                              field.node_position(p1.x(), p1.y(), p1.z()) * t);
    }
    return it->second;
  };

  for (int k = 0; k + 1 < n.z(); ++k)
    for (int j = 0; j + 1 < n.y(); ++j)
      for (int i = 0; i + 1 < n.x(); ++i) {
        int cube = 0;
        for (int c = 0; c < 8; ++c)
          if (field.at(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2]) < iso) cube |= 1 << c;
        const auto& tris = mc::kTriangles[cube];
        for (int t = 0; t < 16 && tris[t] >= 0; t += 3) {
          Triangle tri;
          for (int e = 0; e < 3; ++e) {
            const auto& corners = mc::kEdgeCorners[tris[t + e]];
            tri[e] = vertex_on(i, j, k, corners[0], corners[1]);
          }
          mesh.triangles.push_back(tri);
        }
      }
  return mesh;
}

std::vector<SurfaceMesh> extract_surfaces(const CategoryDensityFields& fields, Real iso) {
  std::vector<SurfaceMesh> out;
  for (const auto& f : fields.fields) {
    auto mesh = marching_cubes(f, iso);
    if (!mesh.empty()) out.push_back(std::move(mesh));
  }
  return out;
}

std::vector<SurfaceMesh> surface_particles(const ParticleSet& particles, Real domain_side, const SurfacingParams& params) {
  const auto fields = accumulate_density(particles, domain_side, params.resolution);
  const Real iso = params.iso.value_or(fields.default_iso());
  if (!(iso > 0)) return {};
  auto meshes = extract_surfaces(fields, iso);
  for (auto& m : meshes) m = laplacian_smooth(std::move(m), params.smoothing_iterations, params.smoothing_strength);
  return meshes;
}

}  // namespace putty
