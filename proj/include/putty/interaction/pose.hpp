#pragma once

#include <deque>

#include "putty/collision/rig.hpp"
#include "putty/core/types.hpp"

namespace putty {

/// Trailing window of tracking samples for one hand.
class PoseHistory {
 public:
  explicit PoseHistory(Real window = 0.2) : window_(window) {}

  /// Appends a sample; times must increase. Samples older than the window
  /// are dropped except the newest one before it, which anchors the first
  /// frame duration.
  void push(Real time, JointMap joints);
  void clear() { samples_.clear(); }

  bool empty() const noexcept { return samples_.empty(); }
  std::size_t size() const noexcept { return samples_.size(); }
  Real window() const noexcept { return window_; }
  const std::deque<std::pair<Real, JointMap>>& samples() const noexcept { return samples_; }

 private:
  Real window_;
  std::deque<std::pair<Real, JointMap>> samples_;
};

/// Per-joint weighted linear least-squares fit in time over the window,
/// evaluated at `now`. Weights are frame durations. Orientations are taken
/// from the newest sample.
JointMap smooth_pose(const PoseHistory& history, Real now);

/// Poses a rig template. Velocities are (new - old) / frame_dt against
/// `previous` (zero when absent or when the sphere count differs).
/// Throws ValidationError for a binding to a missing joint.
MedialRig pose_rig(const RigTemplate& rig, const JointMap& joints, const MedialRig* previous, Real frame_dt);

/// Spheres moved to lerp(from, to, s) with velocities from `to`.
MedialRig interpolate_rig(const MedialRig& from, const MedialRig& to, Real s);

}  // namespace putty
