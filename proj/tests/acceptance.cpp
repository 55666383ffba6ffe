// Acceptance suite: one PASS/FAIL line per headline property, with the
// measured numbers. Every check uses its own oracle rather than the solver's
// internal statistics.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "putty/appearance/splats.hpp"
#include "putty/cli/commands.hpp"
#include "putty/collision/contact.hpp"
#include "putty/interaction/simulation.hpp"
#include "putty/mpm/constitutive.hpp"
#include "putty/mpm/engine.hpp"
#include "putty/mpm/plasticity.hpp"
#include "putty/session/server.hpp"
#include "putty/surfacing/density.hpp"

using namespace putty;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

std::mt19937_64 gen(0x5eed);

Real uniform(Real lo = 0, Real hi = 1) { return std::uniform_real_distribution<Real>(lo, hi)(gen); }
Vec3 uniform_vec(Real lo = 0, Real hi = 1) { return Vec3(uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)); }
Mat3 uniform_mat(Real lo, Real hi) {
  Mat3 m;
  for (int i = 0; i < 9; ++i) m.data()[i] = uniform(lo, hi);
  return m;
}
Mat3 random_deformation(Real amplitude, Real min_det) {
  for (;;) {
    const Mat3 F = Mat3::Identity() + uniform_mat(-amplitude, amplitude);
    if (F.determinant() > min_det) return F;
  }
}
Vec3 singular_values(const Mat3& F) { return Eigen::JacobiSVD<Mat3>(F).singularValues(); }

std::vector<std::uint32_t> all_indices(std::size_t n) {
  std::vector<std::uint32_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<std::uint32_t>(i);
  return idx;
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

JointMap palm_at(const Vec3& p) { return JointMap{{"palm", Joint{p, Quat::Identity()}}}; }

// ---------------------------------------------------------------------------

Outcome conservation() {
  MaterialParams corotated;
  corotated.stress_model = StressModel::Corotated;
  MaterialParams neo;
  const std::vector<MaterialParams> mats{corotated, neo};
  Real worst_mass = 0, worst_momentum = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Grid g(24, 1.0);
    ParticleSet p;
    for (int i = 0; i < 200; ++i) {
      p.push_back(uniform_vec(0.2, 0.8), uniform(0.5, 2.0), uniform(1e-6, 1e-5), static_cast<std::uint16_t>(i % 2), 0);
      p.v.back() = uniform_vec(-1, 1);
      p.F.back() = random_deformation(0.2, 0.5);
      p.C.back() = uniform_mat(-5, 5);
    }
    particle_to_grid(p, g, mats, 1e-4, all_indices(p.size()));
    Real grid_mass = 0;
    Vec3 grid_momentum = Vec3::Zero(), particle_momentum = Vec3::Zero();
    for (std::size_t i = 0; i < g.node_count(); ++i) {
      grid_mass += g.mass[i];
      grid_momentum += g.momentum[i];
    }
    Real particle_mass = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      particle_mass += p.mass[i];
      particle_momentum += p.mass[i] * p.v[i];
    }
    worst_mass = std::max(worst_mass, std::abs(grid_mass - particle_mass) / particle_mass);
    worst_momentum =
        std::max(worst_momentum, (grid_momentum - particle_momentum).norm() / std::max(Real(1), particle_momentum.norm()));
  }

  // Rigid translation: F must not drift.
  SceneConfig c;
  c.grid_resolution = 24;
  c.dt = default_dt(24);
  c.damping = 0;
  ShapeSpec s;
  s.radius = 0.15;
  c.shapes.push_back(s);
  auto p = seed_particles(c);
  for (auto& v : p.v) v = Vec3(0.2, -0.1, 0.05);
  MpmSolver solver(c);
  solver.set_full(p);
  Real drift = 0;
  for (int step = 0; step < 10; ++step) {
    const auto before = p.F;
    solver.substep(p);
    for (std::size_t i = 0; i < p.size(); ++i) drift = std::max(drift, (p.F[i] - before[i]).cwiseAbs().maxCoeff());
  }
  return {worst_mass < 1e-6 && worst_momentum < 1e-6 && drift < 1e-9,
          fmt("100 random states: mass rel err %.2e, momentum rel err %.2e; rigid translation F drift %.2e/substep",
              worst_mass, worst_momentum, drift)};
}

Outcome constitutive() {
  const Real mu0 = 3.85e4, lambda0 = 5.77e4;
  Real rest = 0;
  for (auto model : {StressModel::NeoHookean, StressModel::Corotated})
    rest = std::max(rest, first_piola<Real>(Mat3::Identity(), model, mu0, lambda0).cwiseAbs().maxCoeff());

  Real fd_err = 0;
  for (auto model : {StressModel::NeoHookean, StressModel::Corotated})
    for (int trial = 0; trial < 20; ++trial) {
      const Mat3 F = random_deformation(0.3, 0.5);
      const Mat3 dF = uniform_mat(-1, 1);
      const Real mu = 2.0, lambda = 3.0, h = 1e-6;
      const Real fd =
          (energy_density<Real>(F + h * dF, model, mu, lambda) - energy_density<Real>(F - h * dF, model, mu, lambda)) /
          (2 * h);
      const Real analytic = (first_piola<Real>(F, model, mu, lambda).array() * dF.array()).sum();
      fd_err = std::max(fd_err, std::abs(fd - analytic) / std::max(std::abs(analytic), Real(1e-3)));
    }

  const Real mu = 1.0, lambda = 1.5;
  const VonMises vm{0.2};
  const ClampPlasticity cl{0.85, 1.15};
  const DruckerPrager dp{0.25};
  Real idem = 0, vm_excess = -1, clamp_excess = -1;
  for (int trial = 0; trial < 1000; ++trial) {
    const Mat3 F = random_deformation(0.6, 0.2);
    for (const PlasticityModel& m : {PlasticityModel(vm), PlasticityModel(cl), PlasticityModel(dp)}) {
      const Mat3 once = apply_plasticity<Real>(F, m, mu, lambda);
      idem = std::max(idem, (apply_plasticity<Real>(once, m, mu, lambda) - once).norm());
    }
    const Vec3 eps = singular_values(apply_plasticity<Real>(F, vm, mu, lambda)).array().log();
    vm_excess = std::max(vm_excess, (eps - Vec3::Constant(eps.sum() / 3)).norm() - vm.tau_y / (2 * mu));
    const Vec3 sv = singular_values(apply_plasticity<Real>(F, cl, mu, lambda));
    clamp_excess = std::max({clamp_excess, cl.sigma_min - sv.minCoeff(), sv.maxCoeff() - cl.sigma_max});
  }
  return {rest < 1e-9 * mu0 && fd_err < 1e-4 && idem < 1e-9 && vm_excess <= 1e-8 && clamp_excess <= 1e-12,
          fmt("|P(I)| %.1e; energy-gradient rel err %.1e; 1000 F: idempotence %.1e, VM excess %.1e, clamp excess %.1e",
              rest, fd_err, idem, vm_excess, clamp_excess)};
}

Outcome contact() {
  // Medial primitives against densely sampled interpolated spheres.
  Real sdf_err = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const Vec3 p = uniform_vec(0.2, 0.8);
    const Vec3 a = uniform_vec(0.3, 0.7);
    Real brute = std::numeric_limits<Real>::infinity(), d = 0;
    if (trial % 2 == 0) {
      const ConeShape<Real> cone{{MedialSphere<Real>{a, uniform(0.01, 0.08), Vec3::Zero()},
                                  MedialSphere<Real>{Vec3(a + uniform_vec(-0.2, 0.2)), uniform(0.01, 0.08), Vec3::Zero()}}};
      for (int i = 0; i < 10000; ++i) {
        const Real t = Real(i) / 9999;
        brute = std::min(brute, (p - ((1 - t) * cone.s[0].center + t * cone.s[1].center)).norm() -
                                    ((1 - t) * cone.s[0].radius + t * cone.s[1].radius));
      }
      d = primitive_sdf<Real>(p, cone).distance;
    } else {
      const SlabShape<Real> slab{{MedialSphere<Real>{a, uniform(0.01, 0.06), Vec3::Zero()},
                                  MedialSphere<Real>{Vec3(a + uniform_vec(-0.2, 0.2)), uniform(0.01, 0.06), Vec3::Zero()},
                                  MedialSphere<Real>{Vec3(a + uniform_vec(-0.2, 0.2)), uniform(0.01, 0.06), Vec3::Zero()}}};
      const int n = 140;
      for (int i = 0; i <= n; ++i)
        for (int j = 0; i + j <= n; ++j) {
          const Real u = Real(i) / n, v = Real(j) / n, w = 1 - u - v;
          brute = std::min(brute, (p - (u * slab.s[0].center + v * slab.s[1].center + w * slab.s[2].center)).norm() -
                                      (u * slab.s[0].radius + v * slab.s[1].radius + w * slab.s[2].radius));
        }
      d = primitive_sdf<Real>(p, slab).distance;
    }
    sdf_err = std::max(sdf_err, std::abs(d - brute));
  }

  // Hash against the exhaustive scan on a posed hand plus tools.
  std::size_t hash_mismatch = 0;
  const Real inflate = 1.0 / 64;
  for (int world = 0; world < 10; ++world) {
    std::vector<MedialPrimitive> prims;
    for (int i = 0; i < 60; ++i) {
      const Vec3 a = uniform_vec(0.1, 0.9);
      MedialSphere<Real> s0{a, uniform(0.01, 0.05), Vec3::Zero()};
      MedialSphere<Real> s1{Vec3(a + uniform_vec(-0.1, 0.1)), uniform(0.01, 0.05), Vec3::Zero()};
      MedialSphere<Real> s2{Vec3(a + uniform_vec(-0.1, 0.1)), uniform(0.01, 0.05), Vec3::Zero()};
      if (i % 3 == 0) prims.emplace_back(SphereShape<Real>{s0});
      else if (i % 3 == 1) prims.emplace_back(ConeShape<Real>{{s0, s1}});
      else prims.emplace_back(SlabShape<Real>{{s0, s1, s2}});
    }
    const ContactWorld w(prims, {}, inflate);
    for (int i = 0; i < 1000; ++i) {
      const Vec3 q = uniform_vec(-0.1, 1.1);
      const auto fast = w.query(q);
      const auto slow = w.query_exhaustive(q);
      const bool ok = slow.distance <= inflate ? (fast.distance == slow.distance && fast.primitive == slow.primitive)
                                               : fast.distance >= slow.distance;
      hash_mismatch += !ok;
    }
  }

  // A rod sweeps through the clay while the hand presses from above.
  SceneConfig c;
  c.grid_resolution = 32;
  c.dt = default_dt(32);
  c.right_tool = "rod";
  ShapeSpec s;
  s.radius = 0.2;
  c.shapes.push_back(s);
  FrameSimulator sim(c);
  Real worst = std::numeric_limits<Real>::infinity();
  std::size_t touched = 0;
  for (int f = 0; f < 50; ++f) {
    sim.push_pose(Hand::Right, sim.input_time(), palm_at(Vec3(0.25 + 0.01 * f, 0.5 + 0.2 - 0.04 + 0.025, 0.42)));
    sim.push_pose(Hand::Left, sim.input_time(), default_hand_pose(Vec3(0.5, 0.5 + 0.2 + 0.03 - 0.0015 * f, 0.45)));
    sim.step();
    std::vector<MedialPrimitive> prims;
    for (const auto& rig : sim.rigs())
      if (rig) for (auto& prim : rig->primitives()) prims.push_back(prim);
    const ContactWorld world(prims, {}, c.dx());
    for (const auto& x : sim.state().particles.x) {
      const Real d = world.query_exhaustive(x).distance;
      worst = std::min(worst, d);
      touched += d < 1e-3;
    }
  }
  return {sdf_err < 1e-3 && hash_mismatch == 0 && worst >= -1e-6,
          fmt("SDF vs dense sampling max |dd| %.2e on 1e4 queries; hash mismatches %zu/10000; 50-frame sweep "
              "min signed distance %.2e (%zu particle-frames within 1e-3 of a tool)",
              sdf_err, hash_mismatch, worst, touched)};
}

// ---------------------------------------------------------------------------

struct LocalizedRun {
  std::vector<Vec3> x;
  double seconds = 0;
  std::size_t active = 0;
};

Outcome localized_ablation() {
  const fs::path rig = fs::temp_directory_path() / "putty_acceptance_finger.json";
  std::ofstream(rig) << R"({"version":1,"name":"finger","spheres":[{"joints":["palm"],"radius":0.02}],"lone_spheres":[0]})";

  // A slab of clay resting on the floor, poked from above by a fingertip.
  SceneConfig c;
  c.grid_resolution = 64;
  c.dt = 1e-4;
  c.substeps_per_frame = 5;
  c.walls = WallCondition::Sticky;
  c.right_tool = rig.string();
  ShapeSpec block;
  block.kind = ShapeKind::Box;
  const Real height = 0.375, floor = 2.0 / 64;
  block.half_extents = Vec3(0.4, height / 2, 0.4);
  block.center = Vec3(0.5, floor + height / 2, 0.5);
  c.shapes.push_back(block);
  SimState initial;
  initial.particles = seed_particles(c);
  initial.rebuild_objects();

  const Real tool_radius = 0.02, speed = 0.0005;
  const int frames = 40;  // 200 substeps
  auto tip = [&](int f) { return Vec3(0.5, floor + height + tool_radius - speed * f, 0.5); };
  auto run = [&](std::optional<Real> half_side) {
    c.localized.enabled = half_side.has_value();
    if (half_side) c.localized.half_side = *half_side;
    FrameSimulator sim(c, initial);
    LocalizedRun out;
    const auto t0 = Clock::now();
    for (int f = 1; f <= frames; ++f) {
      sim.push_pose(Hand::Right, sim.input_time(), palm_at(tip(f)));
      sim.step();
      out.active = std::max(out.active, sim.solver().active_indices().size());
    }
    out.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    out.x = sim.state().particles.x;
    return out;
  };
  const auto full = run(std::nullopt);
  const Real eighth = 1.0 / 16;  // half side of a region spanning (1/8)^3 of the domain
  const auto small = run(eighth);
  const auto mid = run(0.125);
  const auto large = run(0.25);

  // Near the tool: within two cells of the fingertip surface at the end.
  auto near_error = [&](const LocalizedRun& r) {
    Real worst = 0;
    for (std::size_t i = 0; i < full.x.size(); ++i)
      if ((full.x[i] - tip(frames)).norm() - tool_radius <= 2 * c.dx()) worst = std::max(worst, (full.x[i] - r.x[i]).norm());
    return worst / c.domain_side;
  };
  const double speedup = full.seconds / small.seconds;
  // The equivalence bound applies when the tool stays >= 4 cells inside the region: the
  // fingertip plus its two-cell contact band needs half side >= radius + 6 dx = 0.114.
  const Real err_mid = near_error(mid);
  return {speedup >= 2 && err_mid <= 1e-5,
          fmt("%zu particles; region (1/8)^3: %.2fs vs %.2fs full (%.1fx, %zu active); near-tool |dx|/L after 200 "
              "substeps: %.2e at half side 1/16, %.2e at 1/8 (tool >= 4 cells inside), %.2e at 1/4",
              full.x.size(), small.seconds, full.seconds, speedup, small.active, near_error(small), err_mid,
              near_error(large))};
}

Outcome refinement() {
  struct Field {
    std::vector<Vec3> X, u;
  };
  auto run = [](int grid) {
    SceneConfig c;
    c.grid_resolution = grid;
    c.dt = 1e-4;  // same time step on every grid: only the spacing changes
    c.substeps_per_frame = 5;
    ShapeSpec s;
    s.radius = 0.2;
    c.shapes.push_back(s);
    FrameSimulator sim(c);
    Field f{sim.state().particles.x, {}};
    for (int frame = 1; frame <= 40; ++frame) {
      sim.push_pose(Hand::Right, sim.input_time(), default_hand_pose(Vec3(0.5, 0.73 - 0.002 * frame, 0.45)));
      sim.step();
    }
    for (std::size_t i = 0; i < f.X.size(); ++i) f.u.push_back(sim.state().particles.x[i] - f.X[i]);
    return f;
  };
  // Lagrangian displacement sampled at fixed material points with a smooth kernel.
  std::vector<Vec3> points;
  for (int i = 0; i <= 18; ++i)
    for (int j = 0; j <= 18; ++j)
      for (int k = 0; k <= 18; ++k) {
        const Vec3 y = Vec3(0.32, 0.32, 0.32) + 0.02 * Vec3(i, j, k);
        if ((y - Vec3::Constant(0.5)).norm() < 0.17) points.push_back(y);
      }
  auto sample = [&](const Field& f) {
    const Real radius = 1.0 / 32;
    std::vector<Vec3> out;
    for (const auto& y : points) {
      Vec3 sum = Vec3::Zero();
      Real w = 0;
      for (std::size_t i = 0; i < f.X.size(); ++i) {
        const Real d = (f.X[i] - y).norm() / radius;
        if (d >= 1) continue;
        const Real k = (1 - d * d) * (1 - d * d);
        sum += k * f.u[i];
        w += k;
      }
      out.push_back(sum / w);
    }
    return out;
  };
  const auto u32 = sample(run(32));
  const auto u48 = sample(run(48));
  const auto u64 = sample(run(64));
  auto rms = [&](const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    Real s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]).squaredNorm();
    return std::sqrt(s / static_cast<Real>(a.size()));
  };
  Real peak = 0;
  for (const auto& v : u64) peak = std::max(peak, v.norm());
  const Real d1 = rms(u32, u48), d2 = rms(u48, u64);
  return {d2 < d1 && peak > 1e-3,
          fmt("palm press, %zu material points, peak |u| %.3e: rms |u32-u48| %.3e > |u48-u64| %.3e", points.size(), peak,
              d1, d2)};
}

// ---------------------------------------------------------------------------

DensityField sample_field(int n, Real h, const std::function<Real(const Vec3&)>& f) {
  DensityField d;
  d.h = h;
  d.dims = Vec3i::Constant(n);
  d.values.resize(static_cast<std::size_t>(n) * n * n);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) d.values[d.index(i, j, k)] = f(d.node_position(i, j, k));
  return d;
}

ParticleSet solid_ball(const Vec3& c, Real r, Real spacing, std::uint32_t category) {
  ParticleSet p;
  const int n = static_cast<int>(std::ceil(r / spacing));
  for (int k = -n; k <= n; ++k)
    for (int j = -n; j <= n; ++j)
      for (int i = -n; i <= n; ++i) {
        const Vec3 x = c + spacing * Vec3(i + 0.25, j + 0.25, k + 0.25);
        if ((x - c).norm() <= r) p.push_back(x, 1e-3, 1e-6, 0, category);
      }
  return p;
}

Outcome surfacing() {
  const Real r = 0.3;
  const Vec3 c = Vec3::Constant(0.5);
  // Linear ramp whose 0.5 level set is the sphere.
  const auto field = sample_field(65, 1.0 / 64, [&](const Vec3& x) { return std::clamp(1.5 - (x - c).norm() / r, 0.0, 1.0); });
  const auto sphere = marching_cubes(field, 0.5);
  const Real area_err = std::abs(surface_area(sphere) / (4 * std::numbers::pi * r * r) - 1);
  const auto topo = analyze_topology(sphere);

  ParticleSet blobs = solid_ball(Vec3(0.42, 0.5, 0.5), 0.12, 1.0 / 96, 0);
  const auto other = solid_ball(Vec3(0.62, 0.5, 0.5), 0.08, 1.0 / 96, 1);  // touching
  for (std::size_t i = 0; i < other.size(); ++i)
    blobs.push_back(other.x[i], other.mass[i], other.volume0[i], other.material[i], other.category[i]);
  const auto fields = accumulate_density(blobs, 1, 64);
  const auto meshes = extract_surfaces(fields, fields.default_iso());
  bool separate = meshes.size() == 2;
  for (const auto& m : meshes) {
    const auto t = analyze_topology(m);
    separate = separate && t.components == 1 && t.closed_manifold() && t.euler() == 2;
  }
  auto fused = blobs;
  for (auto& cat : fused.category) cat = 0;
  const auto fused_meshes = extract_surfaces(accumulate_density(fused, 1, 64), fields.default_iso());
  const bool fuses = fused_meshes.size() == 1 && analyze_topology(fused_meshes[0]).components == 1;

  auto noisy = marching_cubes(sample_field(33, 1.0 / 32, [&](const Vec3& x) {
                                return std::clamp(1.5 - (x - c).norm() / r, 0.0, 1.0);
                              }),
                              0.5);
  for (auto& v : noisy.vertices) v += (v - c).normalized() * uniform(-0.01, 0.01);
  auto radial_rms = [&](const SurfaceMesh& m) {
    Real s = 0;
    for (const auto& v : m.vertices) s += std::pow((v - c).norm() - r, 2);
    return std::sqrt(s / static_cast<Real>(m.vertices.size()));
  };
  const Real before = radial_rms(noisy), after = radial_rms(laplacian_smooth(noisy, 5, 0.5));
  // Smoothing shrinks the sphere slightly; compare spread about the mean radius too.
  auto spread = [&](const SurfaceMesh& m) {
    Real mean = 0;
    for (const auto& v : m.vertices) mean += (v - c).norm();
    mean /= static_cast<Real>(m.vertices.size());
    Real s = 0;
    for (const auto& v : m.vertices) s += std::pow((v - c).norm() - mean, 2);
    return std::sqrt(s / static_cast<Real>(m.vertices.size()));
  };
  const Real spread_before = spread(noisy), spread_after = spread(laplacian_smooth(noisy, 5, 0.5));
  return {area_err < 0.05 && topo.euler() == 2 && topo.closed_manifold() && separate && fuses &&
              after < before && spread_after < spread_before,
          fmt("sphere area err %.2f%%, Euler %d, closed %d; touching blobs -> %zu closed genus-0 meshes (one when "
              "categories match: %d); smoothing radial rms %.2e -> %.2e, spread %.2e -> %.2e",
              100 * area_err, static_cast<int>(topo.euler()), topo.closed_manifold(), meshes.size(), fuses, before,
              after, spread_before, spread_after)};
}

Outcome separated_representation() {
  SceneConfig c;
  c.grid_resolution = 32;
  c.dt = default_dt(32);
  c.right_tool = "rod";
  ShapeSpec s;
  s.radius = 0.15;
  c.shapes.push_back(s);
  SimState st;
  st.particles = seed_particles(c);
  std::vector<std::size_t> twin;
  for (std::size_t i = 0; i < st.particles.size(); i += 7) {
    st.appearance.push_back(st.particles.x[i], Mat3::Identity() * 1e-5, st.particles.material[i], st.particles.category[i], {});
    twin.push_back(i);
  }
  FrameSimulator sim(c, st);
  Real worst = 0, identity = 0;
  int substeps = 0;
  for (int f = 0; f < 20; ++f) {
    sim.push_pose(Hand::Right, sim.input_time(), palm_at(Vec3(0.62 - 0.004 * f, 0.55, 0.4)));
    sim.step([&](const SubstepReport&) {
      ++substeps;
      const auto& now = sim.state();
      for (std::size_t k = 0; k < twin.size(); ++k) {
        worst = std::max(worst, (now.appearance.x[k] - now.particles.x[twin[k]]).norm());
        const Mat3& F = now.appearance.F[k];
        identity = std::max(identity, (now.appearance.cov[k] - F * now.appearance.rest_cov[k] * F.transpose()).norm() /
                                          now.appearance.cov[k].norm());
      }
    });
  }
  Real moved = 0;
  for (std::size_t k = 0; k < twin.size(); ++k) moved = std::max(moved, (sim.state().appearance.x[k] - st.appearance.x[k]).norm());

  // Metric: mean volume of the k largest over the k smallest, excess over r.
  Real metric_err = 0;
  for (int trial = 0; trial < 50; ++trial) {
    AppearanceSet a;
    for (int i = 0; i < 40 + trial; ++i) {
      const Mat3 B = uniform_mat(-1, 1) * 0.01;
      const Mat3 S = B * B.transpose() + Mat3::Identity() * 1e-6;
      a.push_back(uniform_vec(), Mat3((S + S.transpose()) / 2), 0, 0, {});
    }
    update_covariances(a);
    const Real alpha = uniform(0.05, 0.5), r = uniform(1, 5);
    std::vector<Real> v;
    for (const auto& cov : a.cov) v.push_back(4.0 / 3.0 * std::numbers::pi * std::sqrt(cov.determinant()));
    std::sort(v.begin(), v.end(), std::greater<>());
    const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(alpha * v.size()));
    Real top = 0, bottom = 0;
    for (std::size_t i = 0; i < k; ++i) {
      top += v[i] / k;
      bottom += v[v.size() - 1 - i] / k;
    }
    const Real brute = std::max(top / bottom, r) - r;
    metric_err = std::max(metric_err, std::abs(volume_ratio_metric(a, alpha, r) - brute) / std::max(brute, Real(1)));
  }
  AppearanceSet uniform_set;
  for (int i = 0; i < 50; ++i) uniform_set.push_back(uniform_vec(), Mat3::Identity() * 1e-4, 0, 0, {});
  update_covariances(uniform_set);
  const Real uniform_metric = volume_ratio_metric(uniform_set, 0.1, 2);

  return {worst < 1e-6 * c.domain_side && identity < 1e-9 && metric_err < 1e-12 && uniform_metric == 0 && moved > 1e-4,
          fmt("%zu twin splats over %d substeps: max |x_g - x_p| %.2e L, max rel |a - F A F^T| %.1e (tool moved them "
              "%.3f); metric vs brute force %.1e; uniform volumes, r = 2 -> %g",
              twin.size(), substeps, worst / c.domain_side, identity, moved, metric_err, uniform_metric)};
}

// ---------------------------------------------------------------------------

Trajectory poke(int frames, Real interval) {
  Trajectory t;
  for (int f = 0; f <= frames; ++f) {
    TrajectorySample s;
    s.time = f * interval;
    s.hands[1] = palm_at(Vec3(0.5, 0.72 - 0.004 * f, 0.42));
    if (f == 0) s.events.push_back(ToolSelect{Hand::Right, "plate"});
    if (f == 3) s.events.push_back(PinchStart{Hand::Left, Vec3(0.5, 0.5, 0.62), 0.06, 1});
    if (f == 4) s.events.push_back(PinchMove{Hand::Left, Vec3(0.5, 0.5, 0.68)});
    if (f == 8) s.events.push_back(PinchEnd{Hand::Left});
    t.samples.push_back(s);
  }
  return t;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "putty_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);

  SceneConfig c;
  c.grid_resolution = 32;
  c.dt = default_dt(32);
  c.surfacing.resolution = 48;
  c.surfacing.cadence = 1;
  ShapeSpec s;
  s.radius = 0.15;
  c.shapes.push_back(s);
  std::ofstream(dir / "scene.json") << scene_to_json(c).dump(2);
  const auto traj = poke(12, c.frame_interval);
  save_trajectory(traj, dir / "poke.json");

  std::ostringstream log;
  std::size_t compared = 0, differing = 0;
  for (const char* run : {"a", "b"}) {
    cli::SimulateOptions o;
    o.scene.scene = dir / "scene.json";
    o.trajectory = dir / "poke.json";
    o.frames = 12;
    o.export_every = 4;
    o.out = dir / run;
    cli::simulate(o, log);
  }
  for (const auto& entry : fs::directory_iterator(dir / "a")) {
    const auto name = entry.path().filename();
    if (name == "timings.jsonl") continue;  // wall clock
    ++compared;
    differing += slurp(entry.path()) != slurp(dir / "b" / name);
  }

  // Wire replay against an offline replay of the same trajectory.
  SessionOptions opt;
  opt.autosave_seconds = 0;
  opt.lockstep = true;
  Session session(c, opt);
  SessionServer server(session, 0);
  server.start();
  float worst = std::numeric_limits<float>::infinity();
  bool same_shape = false;
  {
    SessionClient client("127.0.0.1", server.port());
    client.await_reply(client.send(protocol::Hello{1, false, true}));
    const auto wire = wire_replay(client, traj, 12, c.frame_interval);
    FrameSimulator offline(c);
    replay(offline, traj, 12);
    const auto expected =
        protocol::mesh_frame(offline.state().frame, surface_particles(offline.state().particles, c.domain_side, c.surfacing));
    same_shape = wire.frame == expected.frame && wire.categories.size() == expected.categories.size();
    for (std::size_t k = 0; same_shape && k < wire.categories.size(); ++k) {
      same_shape = wire.categories[k].positions.size() == expected.categories[k].positions.size() &&
                   wire.categories[k].indices == expected.categories[k].indices;
      if (!same_shape) break;
      worst = 0;
      for (std::size_t i = 0; i < wire.categories[k].positions.size(); ++i)
        worst = std::max(worst, std::abs(wire.categories[k].positions[i] - expected.categories[k].positions[i]));
    }
  }
  server.stop();
  return {compared >= 5 && differing == 0 && same_shape && worst <= 1e-6f,
          fmt("simulate twice: %zu/%zu output files byte-identical; websocket lockstep replay vs offline: max vertex "
              "delta %.2e",
              compared - differing, compared, static_cast<double>(worst))};
}

Outcome throughput() {
  cli::BenchOptions o;
  o.grids = {48};
  o.ppcs = {8};
  o.substeps = {5};
  o.sphere_radius = 0.24;
  o.duration = 3;
  o.surfacing_cadence = 2;
  const auto row = cli::bench(o).rows.at(0);
  return {row.steps_per_second > 0,
          fmt("(non-gating) grid 48, %zu particles, 5 substeps: %.1f substeps/s, frame %.1f ms mean / %.1f ms p95; "
              "per frame p2g %.1f, grid %.1f, g2p %.1f, adjust %.1f, plasticity %.1f, surfacing %.1f ms",
              row.particles, row.steps_per_second, 1e3 * row.mean_frame, 1e3 * row.p95_frame, 1e3 * row.p2g,
              1e3 * row.grid_update, 1e3 * row.g2p, 1e3 * row.adjust, 1e3 * row.plasticity, 1e3 * row.surfacing)};
}

}  // namespace

// Usage: acceptance [--known-failure NAME]... [--report FILE] [NAME]...
// A known failure still prints FAIL; it does not fail the run unless it
// starts passing, so the list cannot go stale.
int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, Outcome (*)()>> criteria{
      {"conservation", conservation},
      {"constitutive", constitutive},
      {"contact", contact},
      {"localized-ablation", localized_ablation},
      {"refinement-convergence", refinement},
      {"surfacing", surfacing},
      {"separated-representation", separated_representation},
      {"determinism", determinism},
      {"throughput", throughput},
  };
  std::set<std::string> known, only;
  std::optional<fs::path> report_path;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--known-failure" && i + 1 < argc) known.insert(argv[++i]);
    else if (arg == "--report" && i + 1 < argc) report_path = argv[++i];
    else only.insert(arg);
  }
  std::ofstream report;
  if (report_path) report.open(*report_path);

  int unexpected = 0, passed = 0, failed = 0;
  for (const auto& [name, check] : criteria) {
    if (!only.empty() && !only.contains(name)) continue;
    const auto t0 = Clock::now();
    Outcome out;
    try {
      out = check();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    const bool listed = known.contains(name);
    const std::string line = fmt("%s %s%s: %s [%.1fs]", out.pass ? "PASS" : "FAIL", name.c_str(),
                                 listed ? (out.pass ? " (listed as known failure)" : " (known failure)") : "",
                                 out.detail.c_str(), secs);
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    if (report) report << line << '\n' << std::flush;
    (out.pass ? passed : failed) += 1;
    unexpected += out.pass == listed;
  }
  const std::string summary = fmt("%d passed, %d failed (%zu known failures listed)", passed, failed, known.size());
  std::printf("%s\n", summary.c_str());
  if (report) report << summary << '\n';
  return unexpected == 0 ? 0 : 1;
}
