#include <iostream>

#include <CLI11.hpp>

#include "putty/cli/commands.hpp"

namespace {

using namespace putty;
using namespace putty::cli;

void add_scene_flags(CLI::App* cmd, SceneOverrides& o) {
  cmd->add_option("--scene", o.scene, "scene JSON file (default: a centered sphere)");
  cmd->add_option("--grid", o.grid, "grid resolution per axis (rescales dt)");
  cmd->add_option("--ppc", o.ppc, "particles per cell");
  cmd->add_option("--substeps", o.substeps, "substeps per frame");
  cmd->add_option("--seed", o.seed, "seed for particle sampling");
  cmd->add_flag_callback("--localized", [&o] { o.localized = true; }, "simulate only a window around the tools");
  cmd->add_flag_callback("--full", [&o] { o.localized = false; }, "simulate every particle");
}

std::map<std::string, MeshFormat> format_names() { return {{"obj", MeshFormat::Obj}, {"ply", MeshFormat::Ply}}; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"putty: real-time elastoplastic clay simulation"};
  app.require_subcommand(1);
  std::function<int()> run;

  SimulateOptions sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "replay a trajectory offline and export results");
  add_scene_flags(simulate_cmd, sim.scene);
  simulate_cmd->add_option("--trajectory", sim.trajectory, "input trajectory JSON");
  simulate_cmd->add_option("--splats", sim.splats, "appearance splat file driven by the simulation");
  simulate_cmd->add_option("--ratio", sim.splat_ratio, "fraction of splats used as physics particles");
  simulate_cmd->add_option("--frames", sim.frames, "frames to simulate");
  simulate_cmd->add_option("--out", sim.out, "output directory");
  simulate_cmd->add_option("--export-every", sim.export_every, "mesh export interval in frames (0: final only)");
  simulate_cmd->add_option("--format", sim.format, "mesh format")->transform(CLI::CheckedTransformer(format_names()));
  simulate_cmd->callback([&] { run = [&] { return simulate(sim, std::cout); }; });

  BenchOptions bo;
  bool json_out = false;
  auto* bench_cmd = app.add_subcommand("bench", "measure frame times over a parameter sweep");
  bench_cmd->add_option("--grid", bo.grids, "grid resolutions")->expected(1, -1);
  bench_cmd->add_option("--ppc", bo.ppcs, "particles per cell")->expected(1, -1);
  bench_cmd->add_option("--substeps", bo.substeps, "substeps per frame")->expected(1, -1);
  bench_cmd->add_option("--duration", bo.duration, "wall seconds per configuration");
  bench_cmd->add_option("--min-frames", bo.min_frames, "minimum measured frames per configuration");
  bench_cmd->add_option("--radius", bo.sphere_radius, "clay sphere radius");
  bench_cmd->add_option("--region-half-side", bo.region_half_side, "localized window half side");
  bench_cmd->add_option("--surfacing-every", bo.surfacing_cadence, "extract surfaces every N frames (0: off)");
  bench_cmd->add_option("--seed", bo.seed, "seed for particle sampling");
  bench_cmd->add_flag("--localized", bo.localized, "simulate only a window around the tool");
  bench_cmd->add_flag("--compare", bo.compare_localized, "run every configuration both full and localized");
  bench_cmd->add_flag("--json", json_out, "print the report as JSON");
  bench_cmd->callback([&] {
    run = [&] {
      const auto report = bench(bo);
      if (json_out) {
        std::cout << report.to_json().dump(2) << '\n';
        return 0;
      }
      std::printf("%5s %4s %4s %9s %10s %10s %10s %10s\n", "grid", "ppc", "sub", "particles", "mode", "mean_ms",
                  "p95_ms", "steps/s");
      for (const auto& r : report.rows)
        std::printf("%5d %4d %4d %9zu %10s %10.2f %10.2f %10.1f\n", r.grid, r.ppc, r.substeps, r.particles,
                    r.localized ? "localized" : "full", 1e3 * r.mean_frame, 1e3 * r.p95_frame, r.steps_per_second);
      return 0;
    };
  });

  ServeOptions so;
  auto* serve_cmd = app.add_subcommand("serve", "run a live session over WebSocket");
  add_scene_flags(serve_cmd, so.scene);
  serve_cmd->add_option("--port", so.port, "TCP port (0: ephemeral)");
  serve_cmd->add_option("--address", so.address, "bind address");
  serve_cmd->add_option("--autosave", so.autosave_seconds, "autosave interval in seconds (<= 0: off)");
  serve_cmd->add_option("--snapshot-dir", so.snapshot_dir, "directory for persisted snapshots");
  serve_cmd->add_option("--record", so.record, "write the input trajectory here on shutdown");
  serve_cmd->add_flag("--lockstep", so.lockstep, "advance frames only on step messages");
  serve_cmd->callback([&] { run = [&] { return serve(so, std::cout); }; });

  std::filesystem::path snapshot, export_out;
  std::optional<std::filesystem::path> export_scene;
  std::optional<MeshFormat> export_format;
  auto* export_cmd = app.add_subcommand("export", "surface a snapshot into a mesh file");
  export_cmd->add_option("--snapshot", snapshot, "snapshot file")->required();
  export_cmd->add_option("--scene", export_scene, "scene whose domain and surfacing settings apply");
  export_cmd->add_option("--out", export_out, "output mesh path")->required();
  export_cmd->add_option("--format", export_format, "mesh format")->transform(CLI::CheckedTransformer(format_names()));
  export_cmd->callback([&] { run = [&] { return export_snapshot(snapshot, export_scene, export_out, export_format, std::cout); }; });

  std::filesystem::path mesh_a, mesh_b;
  Real tol = 1e-6;
  auto* diff_cmd = app.add_subcommand("diff-mesh", "compare two mesh files by vertex distance");
  diff_cmd->add_option("a", mesh_a, "first mesh")->required();
  diff_cmd->add_option("b", mesh_b, "second mesh")->required();
  diff_cmd->add_option("--tol", tol, "allowed symmetric max vertex distance");
  diff_cmd->callback([&] { run = [&] { return diff_mesh(mesh_a, mesh_b, tol, std::cout); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kInvalidInput;
  }
  return guarded(run, std::cerr);
}
