#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "putty/core/types.hpp"
#include "putty/interaction/trajectory.hpp"

namespace putty {

class GestureError : public Error {
 public:
  using Error::Error;
};

/// C1 falloff (1 - s^2)^2 on [0, 1], zero beyond.
template <typename Scalar>
Scalar falloff_kernel(Scalar s) {
  if (s >= 1) return Scalar(0);
  const Scalar t = 1 - s * s;
  return t * t;
}

/// An open pinch selection. Weights are frozen at selection time.
struct PinchSelection {
  Vec3 start = Vec3::Zero();
  Vec3 current = Vec3::Zero();
  Real radius = 0.08;
  Real force_ratio = 1;
  std::vector<std::uint32_t> indices;
  std::vector<Real> weights;
};

/// Specific force (per unit mass) on the selected particles.
struct ForceField {
  Vec3 center = Vec3::Zero();
  Real radius = 0;
  std::vector<std::uint32_t> selected;
  std::vector<Vec3> forces;  // one per particle; zero outside the selection
  bool empty() const { return selected.empty(); }
};

/// Gesture state for both hands.
class GestureState {
 public:
  /// Applies a pinch event; PinchMove/PinchEnd without a selection on that
  /// hand throw GestureError.
  void apply(const InputEvent& event, const ParticleSet& particles);
  /// Drops selections (particle indices become stale after structural edits).
  void clear();

  const std::optional<PinchSelection>& selection(Hand h) const { return hands_[static_cast<int>(h)]; }
  bool active() const { return hands_[0] || hands_[1]; }

  /// Field for this frame. One hand stretches: ratio K (now - start). Two
  /// hands twist: ratio K (omega x (x - a)) with omega from the inter-hand
  /// axis rotation since the previous frame over frame_dt, a the foot point
  /// on the axis.
  ForceField field(const ParticleSet& particles, Real frame_dt);

 private:
  std::array<std::optional<PinchSelection>, 2> hands_;
  std::optional<Vec3> previous_axis_;
};

/// Particle indices within `radius` of `center` and their kernel weights.
void select_particles(const ParticleSet& particles, const Vec3& center, Real radius, std::vector<std::uint32_t>& indices,
                      std::vector<Real>& weights);

}  // namespace putty
