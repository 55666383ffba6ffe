#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "putty/core/scene.hpp"
#include "putty/surfacing/mesh.hpp"
#include "putty/surfacing/mesh_io.hpp"

namespace putty::cli {

/// Exit codes shared by every command.
enum ExitCode : int {
  kOk = 0,
  kOverTolerance = 1,  // diff-mesh found a larger distance than --tol
  kInvalidInput = 2,   // parse, version or validation errors, bad flags
  kRuntimeError = 3,   // I/O and anything else
};

/// Scene-level flag overrides shared by simulate, bench and serve.
struct SceneOverrides {
  std::optional<std::filesystem::path> scene;
  std::optional<int> grid;
  std::optional<int> ppc;
  std::optional<int> substeps;
  std::optional<std::uint64_t> seed;
  std::optional<bool> localized;
};

/// Loads --scene (or the built-in sphere scene) and applies overrides. A
/// grid override rescales dt to keep the scene's dt / dx ratio.
SceneConfig resolve_scene(const SceneOverrides& o);
/// A centered sphere of radius 0.25.
SceneConfig default_scene();

struct SimulateOptions {
  SceneOverrides scene;
  std::optional<std::filesystem::path> trajectory;
  std::optional<std::filesystem::path> splats;
  Real splat_ratio = 0.125;
  int frames = 10;
  std::filesystem::path out = "out";
  int export_every = 0;  // 0: final frame only
  MeshFormat format = MeshFormat::Obj;
};

/// Writes metrics.jsonl (deterministic), timings.jsonl, mesh exports
/// (mesh_<frame>.<ext>, final.<ext>), final.ptys and, with splats,
/// splats_final.txt into `out`.
int simulate(const SimulateOptions& options, std::ostream& log);

struct BenchOptions {
  std::vector<int> grids{48};
  std::vector<int> ppcs{8};
  std::vector<int> substeps{5};
  double duration = 1.0;       // wall seconds per configuration
  int min_frames = 3;
  bool compare_localized = false;
  bool localized = false;
  Real region_half_side = 0.125;
  Real sphere_radius = 0.3;
  int surfacing_cadence = 0;   // 0: no surfacing in the loop
  std::uint64_t seed = 0;
};

struct BenchRow {
  int grid = 0, ppc = 0, substeps = 0;
  std::size_t particles = 0;
  bool localized = false;
  int frames = 0;
  double mean_frame = 0, p95_frame = 0, steps_per_second = 0;
  double p2g = 0, grid_update = 0, g2p = 0, adjust = 0, plasticity = 0, surfacing = 0;  // mean per frame
};

struct BenchReport {
  std::vector<BenchRow> rows;
  nlohmann::json to_json() const;
};

/// A rod sweeps through a sphere of clay; frames run until `duration`.
BenchReport bench(const BenchOptions& options);

/// Converts a snapshot to a mesh file through the surfacing pipeline.
int export_snapshot(const std::filesystem::path& snapshot, const std::optional<std::filesystem::path>& scene,
                    const std::filesystem::path& out, std::optional<MeshFormat> format, std::ostream& log);

/// Max vertex distance between two mesh sets. Meshes with identical
/// connectivity are matched vertex by vertex; otherwise every vertex is
/// matched to its nearest neighbor in the other set, in both directions
/// (infinite when exactly one side is empty).
Real max_vertex_distance(const std::vector<SurfaceMesh>& a, const std::vector<SurfaceMesh>& b);
int diff_mesh(const std::filesystem::path& a, const std::filesystem::path& b, Real tol, std::ostream& log);

struct ServeOptions {
  SceneOverrides scene;
  std::uint16_t port = 8765;
  std::string address = "127.0.0.1";
  double autosave_seconds = 10;
  std::optional<std::filesystem::path> snapshot_dir;
  std::optional<std::filesystem::path> record;
  bool lockstep = false;
};

/// Serves until SIGINT/SIGTERM; writes the input recording on shutdown.
int serve(const ServeOptions& options, std::ostream& log);

/// Runs `body`, mapping library errors to exit codes and messages on `err`.
int guarded(const std::function<int()>& body, std::ostream& err);

}  // namespace putty::cli
