#include "putty/cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <thread>
#include <unordered_map>

#include "putty/appearance/splats.hpp"
#include "putty/interaction/simulation.hpp"
#include "putty/session/server.hpp"
#include "putty/surfacing/density.hpp"

namespace putty::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

SceneConfig default_scene() {
  SceneConfig c;
  ShapeSpec s;
  s.radius = 0.25;
  c.shapes.push_back(s);
  return c;
}

SceneConfig resolve_scene(const SceneOverrides& o) {
  SceneConfig c = o.scene ? load_scene(*o.scene) : default_scene();
  if (o.grid) {
    const Real ratio = c.dt / default_dt(c.grid_resolution, c.domain_side);
    c.grid_resolution = *o.grid;
    c.dt = ratio * default_dt(c.grid_resolution, c.domain_side);
  }
  if (o.ppc) c.particles_per_cell = *o.ppc;
  if (o.substeps) c.substeps_per_frame = *o.substeps;
  if (o.seed) c.seed = *o.seed;
  if (o.localized) c.localized.enabled = *o.localized;
  validate(c);
  return c;
}

namespace {

std::string mesh_name(const std::string& stem, MeshFormat format) {
  return stem + (format == MeshFormat::Obj ? ".obj" : ".ply");
}

void write_line(std::ofstream& out, const json& j, const fs::path& path) {
  out << j.dump() << '\n';
  if (!out) throw Error("cannot write " + path.string());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

}  // namespace

int simulate(const SimulateOptions& o, std::ostream& log) {
  if (o.frames < 0) throw ValidationError("frames", "must be >= 0");
  if (o.export_every < 0) throw ValidationError("export-every", "must be >= 0");
  const SceneConfig config = resolve_scene(o.scene);
  const Trajectory trajectory = o.trajectory ? load_trajectory(*o.trajectory) : Trajectory{};

  SimState initial;
  if (o.splats) {
    auto file = load_splats(*o.splats);
    if (file.repaired) log << "repaired " << file.repaired << " splat covariances\n";
    for (auto m : file.splats.material)
      if (m >= config.materials.size()) throw ValidationError("splats", "material index out of range");
    initial.particles = derive_particles(file.splats, o.splat_ratio, config.seed, config.dx(),
                                         config.materials.front().density);
    for (std::size_t i = 0; i < initial.particles.size(); ++i)
      initial.particles.mass[i] = config.materials[initial.particles.material[i]].density * initial.particles.volume0[i];
    initial.appearance = std::move(file.splats);
  } else {
    initial.particles = seed_particles(config);
  }
  initial.rebuild_objects();
  FrameSimulator sim(config, std::move(initial));

  fs::create_directories(o.out);
  auto metrics = open_out(o.out / "metrics.jsonl");
  auto timings = open_out(o.out / "timings.jsonl");
  auto export_now = [&](const std::string& stem) {
    export_meshes(surface_particles(sim.state().particles, config.domain_side, config.surfacing),
                  o.out / mesh_name(stem, o.format));
  };

  replay(sim, trajectory, o.frames, [&](const FrameSimulator& s, const FrameMetrics& m) {
    write_line(metrics, metrics_to_json(m), o.out / "metrics.jsonl");
    write_line(timings, timing_to_json(s.last_timing()), o.out / "timings.jsonl");
    if (o.export_every > 0 && m.frame % static_cast<std::uint64_t>(o.export_every) == 0) {
      char stem[32];
      std::snprintf(stem, sizeof stem, "mesh_%06llu", static_cast<unsigned long long>(m.frame));
      export_now(stem);
    }
  });
  export_now("final");
  save_snapshot(Snapshot{0, static_cast<double>(sim.state().time), sim.state()}, o.out / "final.ptys");
  if (!sim.state().appearance.empty()) save_splats(sim.state().appearance, o.out / "splats_final.txt");

  log << "simulated " << o.frames << " frames, " << sim.state().particles.size() << " particles -> "
      << o.out.string() << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// Benchmark

json BenchReport::to_json() const {
  json out = json::array();
  for (const auto& r : rows)
    out.push_back({{"grid", r.grid},
                   {"ppc", r.ppc},
                   {"substeps", r.substeps},
                   {"particles", r.particles},
                   {"mode", r.localized ? "localized" : "full"},
                   {"frames", r.frames},
                   {"mean_frame_seconds", r.mean_frame},
                   {"p95_frame_seconds", r.p95_frame},
                   {"steps_per_second", r.steps_per_second},
                   {"phases",
                    {{"p2g", r.p2g},
                     {"grid", r.grid_update},
                     {"g2p", r.g2p},
                     {"adjust", r.adjust},
                     {"plasticity", r.plasticity},
                     {"surfacing", r.surfacing}}}});
  return {{"rows", out}};
}

namespace {

BenchRow bench_one(const BenchOptions& o, int grid, int ppc, int substeps, bool localized) {
  SceneConfig c;
  c.grid_resolution = grid;
  c.dt = default_dt(grid);
  c.particles_per_cell = ppc;
  c.substeps_per_frame = substeps;
  c.seed = o.seed;
  c.localized = {localized, o.region_half_side};
  c.right_tool = "rod";
  c.surfacing.cadence = std::max(1, o.surfacing_cadence);
  ShapeSpec s;
  s.radius = o.sphere_radius;
  c.shapes.push_back(s);
  FrameSimulator sim(c);

  // The rod lies along z, 0.03 below the top of the sphere, and sweeps in x.
  const Real depth_y = 0.5 + o.sphere_radius - 0.03 + 0.025;
  auto pose_at = [&](int frame) {
    const Real span = 1.2 * o.sphere_radius;
    const Real u = std::fmod(0.004 * frame, 2 * span);
    const Real x = 0.5 - o.sphere_radius * 0.6 + (u < span ? u : 2 * span - u);
    return JointMap{{"palm", Joint{Vec3(x, depth_y, 0.42), Quat::Identity()}}};
  };

  BenchRow row{grid, ppc, substeps, sim.state().particles.size(), localized};
  std::vector<double> frame_times;
  PhaseTimes phases;
  double surfacing = 0;
  const auto start = Clock::now();
  for (int f = 0;; ++f) {
    sim.push_pose(Hand::Right, sim.input_time(), pose_at(f));
    sim.step();
    double frame = sim.last_timing().step_seconds;
    if (o.surfacing_cadence > 0 && f % o.surfacing_cadence == 0) {
      const auto t0 = Clock::now();
      (void)surface_particles(sim.state().particles, c.domain_side, c.surfacing);
      const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
      if (f > 0) surfacing += dt;
      frame += dt;
    }
    if (f == 0) continue;  // warm-up
    frame_times.push_back(frame);
    phases += sim.last_timing().phases;
    const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
    if (static_cast<int>(frame_times.size()) >= o.min_frames && elapsed >= o.duration) break;
  }
  const auto n = static_cast<double>(frame_times.size());
  double sum = 0;
  for (double t : frame_times) sum += t;
  std::vector<double> sorted = frame_times;
  std::sort(sorted.begin(), sorted.end());
  row.frames = static_cast<int>(frame_times.size());
  row.mean_frame = sum / n;
  row.p95_frame = sorted[std::min(sorted.size() - 1, static_cast<std::size_t>(std::ceil(0.95 * n)) - 1)];
  row.steps_per_second = substeps * n / sum;
  row.p2g = phases.p2g / n;
  row.grid_update = phases.grid / n;
  row.g2p = phases.g2p / n;
  row.adjust = phases.adjust / n;
  row.plasticity = phases.plasticity / n;
  row.surfacing = surfacing / n;
  return row;
}

}  // namespace

BenchReport bench(const BenchOptions& o) {
  if (o.grids.empty() || o.ppcs.empty() || o.substeps.empty()) throw ValidationError("bench", "empty sweep");
  if (o.min_frames < 1) throw ValidationError("min-frames", "must be >= 1");
  BenchReport report;
  for (int g : o.grids)
    for (int p : o.ppcs)
      for (int s : o.substeps) {
        if (o.compare_localized) {
          report.rows.push_back(bench_one(o, g, p, s, false));
          report.rows.push_back(bench_one(o, g, p, s, true));
        } else {
          report.rows.push_back(bench_one(o, g, p, s, o.localized));
        }
      }
  return report;
}

// ---------------------------------------------------------------------------
// Export and mesh comparison

int export_snapshot(const fs::path& snapshot, const std::optional<fs::path>& scene, const fs::path& out,
                    std::optional<MeshFormat> format, std::ostream& log) {
  const SceneConfig config = scene ? load_scene(*scene) : SceneConfig{};
  const Snapshot snap = load_snapshot(snapshot);
  const auto meshes = surface_particles(snap.state.particles, config.domain_side, config.surfacing);
  if (format && out.has_extension() && mesh_format_for(out) != *format)
    throw ValidationError("format", "does not match the output extension");
  if (format || out.has_extension()) {
    export_meshes(meshes, format && !out.has_extension() ? fs::path(mesh_name(out.string(), *format)) : out);
  } else {
    throw ValidationError("out", "needs a .obj/.ply extension or --format");
  }
  std::size_t tris = 0;
  for (const auto& m : meshes) tris += m.triangles.size();
  log << "exported " << meshes.size() << " meshes, " << tris << " triangles\n";
  return kOk;
}

namespace {

/// Uniform hash grid over one point cloud for nearest-neighbor queries.
class PointGrid {
 public:
  explicit PointGrid(std::vector<Vec3> points) : points_(std::move(points)) {
    Vec3 lo = Vec3::Constant(std::numeric_limits<Real>::max());
    Vec3 hi = -lo;
    for (const auto& p : points_) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const Real extent = std::max((hi - lo).maxCoeff(), Real(1e-12));
    cell_ = std::max(extent / std::cbrt(static_cast<Real>(points_.size())), Real(1e-12));
    for (std::uint32_t i = 0; i < points_.size(); ++i) cells_[key(cell_of(points_[i]))].push_back(i);
  }

  Real nearest(const Vec3& q) const {
    const Eigen::Vector3<long> c = cell_of(q);
    Real best = std::numeric_limits<Real>::infinity();
    // Ring r covers every point within r * cell of q.
    for (long r = 0;; ++r) {
      for (long i = -r; i <= r; ++i)
        for (long j = -r; j <= r; ++j)
          for (long k = -r; k <= r; ++k) {
            if (std::max({std::abs(i), std::abs(j), std::abs(k)}) != r) continue;
            const auto it = cells_.find(key(c + Eigen::Vector3<long>(i, j, k)));
            if (it == cells_.end()) continue;
            for (auto idx : it->second) best = std::min(best, (points_[idx] - q).norm());
          }
      if (best <= static_cast<Real>(r) * cell_) return best;
      if (r >= 32) {  // far from the cloud: a linear scan is cheaper than more rings
        for (const auto& p : points_) best = std::min(best, (p - q).norm());
        return best;
      }
    }
  }

 private:
  Eigen::Vector3<long> cell_of(const Vec3& p) const {
    return Eigen::Vector3<long>(std::lround(std::floor(p(0) / cell_)), std::lround(std::floor(p(1) / cell_)),
                                std::lround(std::floor(p(2) / cell_)));
  }
  static std::uint64_t key(const Eigen::Vector3<long>& c) {
    auto u = [](long v) { return static_cast<std::uint64_t>(v) & 0x1fffff; };
    return u(c(0)) | (u(c(1)) << 21) | (u(c(2)) << 42);
  }

  std::vector<Vec3> points_;
  Real cell_ = 1;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> cells_;
};

std::vector<Vec3> all_vertices(const std::vector<SurfaceMesh>& meshes) {
  std::vector<Vec3> out;
  for (const auto& m : meshes) out.insert(out.end(), m.vertices.begin(), m.vertices.end());
  return out;
}

Real one_sided(const std::vector<Vec3>& from, const PointGrid& to) {
  Real worst = 0;
  for (const auto& p : from) worst = std::max(worst, to.nearest(p));
  return worst;
}

}  // namespace

Real max_vertex_distance(const std::vector<SurfaceMesh>& a, const std::vector<SurfaceMesh>& b) {
  const bool same_connectivity = a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](const auto& x, const auto& y) {
    return x.category == y.category && x.vertices.size() == y.vertices.size() && x.triangles == y.triangles;
  });
  if (same_connectivity) {
    Real worst = 0;
    for (std::size_t m = 0; m < a.size(); ++m)
      for (std::size_t i = 0; i < a[m].vertices.size(); ++i)
        worst = std::max(worst, (a[m].vertices[i] - b[m].vertices[i]).norm());
    return worst;
  }
  auto va = all_vertices(a);
  auto vb = all_vertices(b);
  if (va.empty() && vb.empty()) return 0;
  if (va.empty() || vb.empty()) return std::numeric_limits<Real>::infinity();
  const PointGrid ga(va), gb(vb);
  return std::max(one_sided(va, gb), one_sided(vb, ga));
}

int diff_mesh(const fs::path& a, const fs::path& b, Real tol, std::ostream& log) {
  if (!(tol >= 0)) throw ValidationError("tol", "must be >= 0");
  const Real d = max_vertex_distance(import_meshes(a), import_meshes(b));
  char line[64];
  std::snprintf(line, sizeof line, "max_vertex_distance %.9g\n", d);
  log << line;
  return d > tol ? kOverTolerance : kOk;
}

// ---------------------------------------------------------------------------
// Server

namespace {
std::atomic<bool> g_stop{false};
extern "C" void on_signal(int) { g_stop.store(true); }
}  // namespace

int serve(const ServeOptions& o, std::ostream& log) {
  const SceneConfig config = resolve_scene(o.scene);
  SessionOptions so;
  so.autosave_seconds = o.autosave_seconds;
  so.snapshot_dir = o.snapshot_dir;
  so.lockstep = o.lockstep;
  if (o.snapshot_dir) fs::create_directories(*o.snapshot_dir);
  Session session(config, so);
  SessionServer server(session, o.port, o.address);
  g_stop = false;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.start();
  log << "listening on ws://" << o.address << ':' << server.port() << '\n' << std::flush;
  while (!g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  server.stop();
  if (o.record) save_trajectory(session.recording(), *o.record);
  log << "stopped\n";
  return kOk;
}

int guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const VersionError& e) {
    err << "version error: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const ValidationError& e) {
    err << "invalid input: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}

}  // namespace putty::cli
