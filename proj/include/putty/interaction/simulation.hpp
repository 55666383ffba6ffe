#pragma once

#include <array>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "putty/collision/rig.hpp"
#include "putty/core/scene.hpp"
#include "putty/core/state.hpp"
#include "putty/interaction/gesture.hpp"
#include "putty/interaction/pose.hpp"
#include "putty/interaction/trajectory.hpp"
#include "putty/mpm/engine.hpp"

namespace putty {

/// Deterministic per-frame readout.
struct FrameMetrics {
  std::uint64_t frame = 0;
  Real time = 0;  // simulated seconds after the frame
  std::size_t particles = 0;
  std::size_t active = 0;
  std::size_t splats = 0;
  Real total_mass = 0;
  Real max_penetration = 0;
  std::size_t projected = 0;
  std::size_t clamped = 0;
};

/// Wall-clock cost of one frame (not deterministic; kept apart from metrics).
struct FrameTiming {
  std::uint64_t frame = 0;
  double step_seconds = 0;
  double appearance_seconds = 0;
  PhaseTimes phases;
};

nlohmann::json metrics_to_json(const FrameMetrics& m);
nlohmann::json timing_to_json(const FrameTiming& t);

/// Rig for a tool name: a built-in name or a path to a rig file (*.json).
RigTemplate load_tool(const std::string& name);

/// Frame loop shared by offline replay and live sessions: input is fed as
/// tracking samples and events, then step() advances one frame of
/// substeps_per_frame substeps.
class FrameSimulator {
 public:
  /// Starts from `initial` (seeded particles or a restored snapshot).
  FrameSimulator(SceneConfig config, SimState initial);
  /// Seeds the scene's shapes.
  explicit FrameSimulator(const SceneConfig& config);

  const SceneConfig& config() const noexcept { return config_; }
  const SimState& state() const noexcept { return state_; }
  const SimState& initial_state() const noexcept { return initial_; }
  const MpmSolver& solver() const noexcept { return solver_; }
  const std::array<std::optional<MedialRig>, 2>& rigs() const noexcept { return rigs_; }
  const GestureState& gestures() const noexcept { return gestures_; }
  const FrameTiming& last_timing() const noexcept { return timing_; }
  /// Input-clock time of the next frame. The tick counter keeps running
  /// across restores, so the input clock never goes backwards.
  Real input_time() const noexcept { return static_cast<Real>(tick_) * config_.frame_interval; }
  std::uint64_t tick() const noexcept { return tick_; }

  void set_localized(bool enabled) { config_.localized.enabled = enabled; }
  void set_tool(Hand hand, const std::string& tool);

  /// Queues the sample's poses and events for the next frame.
  void push_sample(const TrajectorySample& sample);
  void push_pose(Hand hand, Real time, JointMap joints);
  void queue_event(InputEvent event);
  /// Applies an event now; only valid between frames. Throws without side
  /// effects when the event is rejected.
  void apply_now(const InputEvent& event) { apply_event(event); }

  /// Swaps in a state at the frame boundary. Selections are dropped.
  void restore(SimState state);

  /// Applies queued events, poses the rigs, picks the active set and runs
  /// the substeps. Optional per-substep observer for audits.
  FrameMetrics step(const std::function<void(const SubstepReport&)>& on_substep = {});

 private:
  void apply_event(const InputEvent& e);

  SceneConfig config_;
  SimState initial_;
  SimState state_;
  MpmSolver solver_;
  GestureState gestures_;
  std::array<RigTemplate, 2> tools_;
  std::array<PoseHistory, 2> histories_;
  std::array<std::optional<MedialRig>, 2> rigs_;
  std::deque<InputEvent> pending_;
  FrameTiming timing_;
  std::uint64_t tick_ = 0;
};

struct ReplayResult {
  std::vector<FrameMetrics> metrics;
  std::vector<FrameTiming> timings;
};

/// Feeds trajectory samples whose time is at most the frame's input time,
/// then steps; repeated for `frames` frames. `on_frame` runs after each.
ReplayResult replay(FrameSimulator& sim, const Trajectory& trajectory, int frames,
                    const std::function<void(const FrameSimulator&, const FrameMetrics&)>& on_frame = {});

/// Index of the first sample not yet due at `input_time`.
std::size_t feed_samples(FrameSimulator& sim, const Trajectory& trajectory, std::size_t cursor, Real input_time);

}  // namespace putty
