#include "putty/mpm/engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "putty/core/kernel.hpp"
#include "putty/mpm/constitutive.hpp"
#include "putty/mpm/plasticity.hpp"

namespace putty {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string describe(const Mat3& F) {
  std::ostringstream os;
  os.precision(6);
  const Eigen::IOFormat fmt(Eigen::StreamPrecision, Eigen::DontAlignCols, ", ", "; ", "", "", "[", "]");
  os << F.format(fmt);
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Regions

std::pair<Vec3, Vec3> position_range(const NodeBox& box, Real dx) {
  return {(box.lo.cast<Real>().array() + 1).matrix() * dx, (box.hi.cast<Real>().array() - 1).matrix() * dx};
}

NodeBox full_nodes(const Grid& grid) { return {Vec3i::Zero(), Vec3i::Constant(grid.n - 1)}; }

NodeBox region_nodes(const ActiveRegion& region, const Grid& grid) {
  NodeBox box;
  for (int d = 0; d < 3; ++d) {
    box.lo(d) = std::clamp(static_cast<int>(std::floor((region.center(d) - region.half_side) / grid.dx)), 0, grid.n - 1);
    box.hi(d) = std::clamp(static_cast<int>(std::ceil((region.center(d) + region.half_side) / grid.dx)), 0, grid.n - 1);
  }
  return box;
}

ActiveRegion update_active_region(std::span<const Vec3> rig_centroids, Real half_side, Real domain_side) {
  ActiveRegion region;
  region.half_side = half_side;
  Vec3 c = Vec3::Constant(domain_side / 2);
  if (!rig_centroids.empty()) {
    c.setZero();
    for (const auto& p : rig_centroids) c += p;
    c /= static_cast<Real>(rig_centroids.size());
  }
  // keep the cube inside the domain when it fits
  for (int d = 0; d < 3; ++d) {
    if (2 * half_side >= domain_side) c(d) = domain_side / 2;
    else c(d) = std::clamp(c(d), half_side, domain_side - half_side);
  }
  region.center = c;
  return region;
}

std::vector<std::uint32_t> set_particle_activity(ParticleSet& particles, const NodeBox& box, const Grid& grid) {
  const auto [lo, hi] = position_range(box, grid.dx);
  std::vector<std::uint32_t> active;
  active.reserve(particles.size());
  for (std::size_t p = 0; p < particles.size(); ++p) {
    const Vec3& x = particles.x[p];
    const bool inside = (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
    particles.active[p] = inside ? 1 : 0;
    if (inside) {
      active.push_back(static_cast<std::uint32_t>(p));
    } else {
      particles.v[p].setZero();
      particles.C[p].setZero();
    }
  }
  return active;
}

// ---------------------------------------------------------------------------
// Transfers

void particle_to_grid(const ParticleSet& particles, Grid& grid, std::span<const MaterialParams> materials, Real dt,
                      std::span<const std::uint32_t> indices, std::span<const Vec3> particle_forces) {
  const Real dx = grid.dx;
  const Real inv_dx = 1 / dx;
  const bool with_forces = !particle_forces.empty();
  for (const auto p : indices) {
    const Vec3& x = particles.x[p];
    const Mat3& F = particles.F[p];
    const MaterialParams& mat = materials[particles.material[p]];
    Mat3 tau;
    try {
      tau = kirchhoff_stress(F, mat.stress_model, mat.mu, mat.lambda);
    } catch (const SingularConfigurationError&) {
      throw Error("non-finite stress at particle " + std::to_string(p) + " with F = " + describe(F));
    }
    const Mat3 fused = (-4 * dt * inv_dx * inv_dx * particles.volume0[p]) * tau;
    if (!fused.allFinite())
      throw Error("non-finite stress at particle " + std::to_string(p) + " with F = " + describe(F));
    const Real m = particles.mass[p];
    const Mat3 affine = m * particles.C[p] + fused;

    // affine * (x_i - x_p) = A (a,b,c)^T + base with A = affine * dx
    const auto st = quadratic_stencil(x, inv_dx);
    const Mat3 A = affine * dx;
    const Vec3 base = m * particles.v[p] - A * st.fx;
    const Vec3 f = with_forces ? particle_forces[p] : Vec3::Zero();
    for (int c = 0; c < 3; ++c)
      for (int b = 0; b < 3; ++b) {
        const Vec3 row = base + b * A.col(1) + c * A.col(2);
        const Real wbc = st.w[b](1) * st.w[c](2);
        std::size_t idx = grid.index(st.base(0), st.base(1) + b, st.base(2) + c);
        for (int a = 0; a < 3; ++a, ++idx) {
          const Real w = st.w[a](0) * wbc;
          grid.mass[idx] += w * m;
          grid.momentum[idx] += w * (row + a * A.col(0));
          if (with_forces) grid.force[idx] += w * f;
        }
      }
  }
}

void update_grid(Grid& grid, const GridUpdateSettings& s, const NodeBox& box, const ContactWorld* contact) {
  const int n = grid.n;
  const Real decay = std::max(Real(0), 1 - s.damping * s.dt);
  const bool with_contact = contact && !contact->empty();
  for (int k = box.lo(2); k <= box.hi(2); ++k)
    for (int j = box.lo(1); j <= box.hi(1); ++j)
      for (int i = box.lo(0); i <= box.hi(0); ++i) {
        const std::size_t idx = grid.index(i, j, k);
        const Real m = grid.mass[idx];
        if (m <= 0) continue;
        Vec3 v = grid.momentum[idx] / m;
        v = v * decay + s.dt * (s.gravity + grid.force[idx] / m);

        if (with_contact) {
          const auto sdf = contact->query(grid.node_position(i, j, k));
          if (sdf.distance < 0) v = contact_velocity(v, sdf, contact->params(), s.dt);
        }

        const Vec3i node(i, j, k);
        bool sticky = false;
        for (int d = 0; d < 3; ++d) {
          const bool wall = node(d) < s.wall_nodes || node(d) > n - 1 - s.wall_nodes;
          if (wall) {
            if (s.walls == WallCondition::Sticky) sticky = true;
            else v(d) = 0;
          }
          if ((box.lo(d) > 0 && node(d) == box.lo(d)) || (box.hi(d) < n - 1 && node(d) == box.hi(d))) sticky = true;
        }
        if (sticky) v.setZero();
        grid.momentum[idx] = v;
      }
}

void gather_velocity(const Grid& grid, const Vec3& x, Vec3& v, Mat3& C) {
  const Real dx = grid.dx;
  const Real inv_dx = 1 / dx;
  const auto st = quadratic_stencil(x, inv_dx);
  // B = sum w v_i (x_i - x)^T = dx * ([sum w v_i a, sum w v_i b, sum w v_i c] - v fx^T)
  v.setZero();
  Mat3 moments = Mat3::Zero();
  for (int c = 0; c < 3; ++c)
    for (int b = 0; b < 3; ++b) {
      const Real wbc = st.w[b](1) * st.w[c](2);
      std::size_t idx = grid.index(st.base(0), st.base(1) + b, st.base(2) + c);
      Vec3 row_sum = Vec3::Zero();
      Vec3 row_a = Vec3::Zero();
      for (int a = 0; a < 3; ++a, ++idx) {
        const Vec3 wv = (st.w[a](0) * wbc) * grid.momentum[idx];
        row_sum += wv;
        row_a += a * wv;
      }
      v += row_sum;
      moments.col(0) += row_a;
      moments.col(1) += b * row_sum;
      moments.col(2) += c * row_sum;
    }
  C = (4 * inv_dx) * (moments - v * st.fx.transpose());
}

std::size_t grid_to_particle(ParticleSet& particles, const Grid& grid, Real dt, std::span<const std::uint32_t> indices) {
  const auto [lo, hi] = particle_bounds(grid.n, grid.dx);
  std::size_t clamped = 0;
  for (const auto p : indices) {
    Vec3 v;
    Mat3 C;
    gather_velocity(grid, particles.x[p], v, C);
    particles.v[p] = v;
    particles.C[p] = C;
    Vec3 x = particles.x[p] + dt * v;
    const Vec3 bounded = x.cwiseMax(lo).cwiseMin(hi);
    if (bounded != x) ++clamped;
    particles.x[p] = bounded;
    particles.F[p] = (Mat3::Identity() + dt * C) * particles.F[p];
  }
  return clamped;
}

void apply_plasticity(ParticleSet& particles, std::span<const MaterialParams> materials,
                      std::span<const std::uint32_t> indices) {
  for (const auto p : indices) {
    const MaterialParams& m = materials[particles.material[p]];
    if (std::holds_alternative<NoPlasticity>(m.plasticity)) continue;
    particles.F[p] = putty::apply_plasticity<Real>(particles.F[p], m);
  }
}

// ---------------------------------------------------------------------------
// Solver

PhaseTimes& PhaseTimes::operator+=(const PhaseTimes& o) {
  p2g += o.p2g;
  grid += o.grid;
  g2p += o.g2p;
  adjust += o.adjust;
  plasticity += o.plasticity;
  return *this;
}

MpmSolver::MpmSolver(const SceneConfig& config)
    : grid_(config.grid_resolution, config.domain_side), materials_(config.materials) {
  settings_.dt = config.dt;
  settings_.gravity = config.gravity;
  settings_.damping = config.damping;
  settings_.walls = config.walls;
  box_ = full_nodes(grid_);
}

void MpmSolver::set_full(ParticleSet& particles) {
  region_.reset();
  box_ = full_nodes(grid_);
  active_ = set_particle_activity(particles, box_, grid_);
}

void MpmSolver::set_region(ParticleSet& particles, const ActiveRegion& region) {
  region_ = region;
  box_ = region_nodes(region, grid_);
  active_ = set_particle_activity(particles, box_, grid_);
}

SubstepReport MpmSolver::substep(ParticleSet& particles, const ContactWorld* contact,
                                 std::span<const Vec3> particle_forces, PhaseTimes* times) {
  SubstepReport report;
  const Real dt = settings_.dt;
  const auto [lo, hi] = position_range(box_, grid_.dx);
  auto phase = [&](const char* name, double PhaseTimes::*slot, auto&& body) {
    const auto t0 = Clock::now();
    try {
      body();
    } catch (const Error& e) {
      throw Error(std::string(name) + ": " + e.what());
    }
    if (times) times->*slot += seconds_since(t0);
  };

  phase("p2g", &PhaseTimes::p2g, [&] {
    const bool full = box_ == full_nodes(grid_);
    if (full) {
      std::fill(grid_.mass.begin(), grid_.mass.end(), Real(0));
      std::fill(grid_.momentum.begin(), grid_.momentum.end(), Vec3::Zero());
    } else {
      for (int k = box_.lo(2); k <= box_.hi(2); ++k)
        for (int j = box_.lo(1); j <= box_.hi(1); ++j)
          for (int i = box_.lo(0); i <= box_.hi(0); ++i) {
            const std::size_t idx = grid_.index(i, j, k);
            grid_.mass[idx] = 0;
            grid_.momentum[idx].setZero();
          }
    }
    if (forces_dirty_ || !particle_forces.empty()) {
      std::fill(grid_.force.begin(), grid_.force.end(), Vec3::Zero());
      forces_dirty_ = !particle_forces.empty();
    }
    particle_to_grid(particles, grid_, materials_, dt, active_, particle_forces);
  });

  phase("grid", &PhaseTimes::grid, [&] { update_grid(grid_, settings_, box_, contact); });

  phase("g2p", &PhaseTimes::g2p, [&] {
    report.clamped = grid_to_particle(particles, grid_, dt, active_);
    if (region_) {
      // keep active stencils inside the region box
      for (const auto p : active_) particles.x[p] = particles.x[p].cwiseMax(lo).cwiseMin(hi);
    }
  });

  phase("adjust", &PhaseTimes::adjust, [&] {
    if (contact && !contact->empty()) report.projection = adjust_particles(particles, active_, *contact);
  });

  phase("plasticity", &PhaseTimes::plasticity, [&] { apply_plasticity(particles, materials_, active_); });
  return report;
}

}  // namespace putty
