#pragma once

#include "putty/core/scene.hpp"
#include "putty/core/state.hpp"
#include "putty/interaction/trajectory.hpp"

namespace putty {

/// Applies an object-level edit to physics and appearance particles.
/// `initial` is the state restored by Reset. Throws ValidationError for
/// unknown ids and for copies or moves that would leave the domain.
void apply_edit(SimState& state, const EditOp& op, const SimState& initial, const SceneConfig& config);

/// Mean particle position of an object (appearance splats when it has no
/// physics particles).
Vec3 object_centroid(const SimState& state, const SceneObject& object);

}  // namespace putty
