#include "putty/collision/contact.hpp"

#include <algorithm>
#include <cmath>

namespace putty {

// ---------------------------------------------------------------------------
// SpatialHash

SpatialHash::SpatialHash(std::span<const MedialPrimitive> primitives, Real inflate) : inflate_(inflate) {
  if (primitives.empty()) return;
  std::vector<std::pair<Vec3, Vec3>> boxes;
  boxes.reserve(primitives.size());
  Real extent = 0;
  for (const auto& prim : primitives) {
    auto [lo, hi] = primitive_bounds(prim);
    lo.array() -= inflate;
    hi.array() += inflate;
    extent = std::max(extent, (hi - lo).maxCoeff());
    boxes.emplace_back(lo, hi);
  }
  cell_ = extent > 0 ? extent : Real(1);
  for (std::size_t p = 0; p < boxes.size(); ++p) {
    const Vec3i a = cell_of(boxes[p].first);
    const Vec3i b = cell_of(boxes[p].second);
    for (int k = a(2); k <= b(2); ++k)
      for (int j = a(1); j <= b(1); ++j)
        for (int i = a(0); i <= b(0); ++i) cells_[key(Vec3i(i, j, k))].push_back(static_cast<int>(p));
  }
}

Vec3i SpatialHash::cell_of(const Vec3& p) const {
  return Vec3i(static_cast<int>(std::floor(p(0) / cell_)), static_cast<int>(std::floor(p(1) / cell_)),
               static_cast<int>(std::floor(p(2) / cell_)));
}

std::uint64_t SpatialHash::key(const Vec3i& c) {
  constexpr std::uint64_t mask = (1u << 21) - 1;
  const auto enc = [](int v) { return static_cast<std::uint64_t>(v + (1 << 20)) & mask; };
  return enc(c(0)) | (enc(c(1)) << 21) | (enc(c(2)) << 42);
}

const std::vector<int>* SpatialHash::cell(const Vec3i& c) const {
  const auto it = cells_.find(key(c));
  return it == cells_.end() ? nullptr : &it->second;
}

void SpatialHash::candidates(const Vec3& p, std::vector<int>& out) const {
  out.clear();
  if (cells_.empty()) return;
  const Vec3i c = cell_of(p);
  for (int dk = -1; dk <= 1; ++dk)
    for (int dj = -1; dj <= 1; ++dj)
      for (int di = -1; di <= 1; ++di)
        if (const auto* list = cell(c + Vec3i(di, dj, dk))) out.insert(out.end(), list->begin(), list->end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
}

// ---------------------------------------------------------------------------
// ContactWorld

ContactWorld::ContactWorld(std::vector<MedialPrimitive> primitives, ContactParams params, Real inflate)
    : primitives_(std::move(primitives)), params_(params), hash_(primitives_, inflate) {
  if (primitives_.empty()) return;
  lo_ = Vec3::Constant(std::numeric_limits<Real>::infinity());
  hi_ = -lo_;
  for (const auto& prim : primitives_) {
    const auto [a, b] = primitive_bounds(prim);
    lo_ = lo_.cwiseMin(a);
    hi_ = hi_.cwiseMax(b);
  }
  // Outside the inflated bounds every primitive is farther than `inflate`.
  lo_.array() -= inflate;
  hi_.array() += inflate;
}

SdfQueryResult ContactWorld::query(const Vec3& p) const {
  SdfQueryResult best;
  if (primitives_.empty() || (p.array() < lo_.array()).any() || (p.array() > hi_.array()).any()) return best;
  thread_local std::vector<int> cand;
  hash_.candidates(p, cand);
  for (int idx : cand) {
    auto q = primitive_sdf(p, primitives_[static_cast<std::size_t>(idx)]);
    if (q.distance < best.distance) {
      best = q;
      best.primitive = idx;
    }
  }
  return best;
}

SdfQueryResult ContactWorld::query_exhaustive(const Vec3& p) const {
  SdfQueryResult best;
  for (std::size_t i = 0; i < primitives_.size(); ++i) {
    auto q = primitive_sdf(p, primitives_[i]);
    if (q.distance < best.distance) {
      best = q;
      best.primitive = static_cast<int>(i);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Grid-level forces

Vec3 contact_velocity(const Vec3& velocity, const SdfQueryResult& sdf, const ContactParams& params, Real dt) {
  if (!(sdf.distance < 0)) return velocity;
  const Real dv_pressure = params.pressure_stiffness * (-sdf.distance) * dt;
  Vec3 v = velocity + dv_pressure * sdf.normal;

  const Vec3 rel = v - sdf.boundary_velocity;
  const Vec3 tangential = rel - rel.dot(sdf.normal) * sdf.normal;
  const Real speed = tangential.norm();
  if (speed > 0) {
    const Real dv_friction = std::min(params.friction * dv_pressure, speed);
    v -= dv_friction / speed * tangential;
  }
  return v;
}

void apply_boundary_forces(Grid& grid, const ContactWorld& world, Real dt, const NodeBox& box) {
  if (world.empty()) return;
  for (int k = box.lo(2); k <= box.hi(2); ++k)
    for (int j = box.lo(1); j <= box.hi(1); ++j)
      for (int i = box.lo(0); i <= box.hi(0); ++i) {
        const std::size_t idx = grid.index(i, j, k);
        if (grid.mass[idx] <= 0) continue;
        const auto sdf = world.query(grid.node_position(i, j, k));
        if (sdf.distance < 0) grid.momentum[idx] = contact_velocity(grid.momentum[idx], sdf, world.params(), dt);
      }
}

// ---------------------------------------------------------------------------
// Particle-level projection

namespace {
constexpr int kMaxProjectionPasses = 8;
constexpr int kMaxMarchSteps = 1024;
}  // namespace

ProjectionStats adjust_points(std::vector<Vec3>& x, std::vector<Vec3>& v, std::span<const std::uint32_t> indices,
                              const ContactWorld& world) {
  ProjectionStats stats;
  if (world.empty()) return stats;
  for (const auto p : indices) {
    auto sdf = world.query(x[p]);
    if (!(sdf.distance < 0)) continue;
    ++stats.projected;
    Vec3 dir = sdf.normal;
    for (int pass = 0; pass < kMaxProjectionPasses && sdf.distance < 0; ++pass) {
      x[p] = sdf.closest;
      v[p] = sdf.boundary_velocity;
      dir = sdf.normal;
      sdf = world.query(x[p]);
    }
    // Overlapping primitives can bounce the point between surfaces. March out
    // along the last normal; a step of the union depth never overshoots the exit.
    // The minimum step bounds grazing exits; it overshoots by at most 1e-5 dx.
    const Real min_step = Real(1e-5) * world.hash().inflation();
    for (int step = 0; step < kMaxMarchSteps && sdf.distance < 0; ++step) {
      x[p] += std::max(-sdf.distance, min_step) * dir;
      v[p] = sdf.boundary_velocity;
      sdf = world.query(x[p]);
    }
    stats.max_penetration = std::max(stats.max_penetration, sdf.distance < 0 ? -sdf.distance : Real(0));
  }
  return stats;
}

ProjectionStats adjust_particles(ParticleSet& particles, std::span<const std::uint32_t> indices,
                                 const ContactWorld& world) {
  return adjust_points(particles.x, particles.v, indices, world);
}

Real max_penetration(std::span<const Vec3> x, const ContactWorld& world) {
  Real worst = 0;
  if (world.empty()) return worst;
  for (const auto& p : x) worst = std::max(worst, -world.query(p).distance);
  return worst;
}

}  // namespace putty
