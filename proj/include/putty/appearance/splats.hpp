#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "putty/collision/contact.hpp"
#include "putty/core/state.hpp"
#include "putty/core/types.hpp"

namespace putty {

struct SplatFile {
  AppearanceSet splats;
  std::size_t repaired = 0;  // covariances made positive definite on load
};

/// Reads the text point-list format (see docs/formats.md). Every splat gets
/// the given material; categories come from the file.
SplatFile read_splats(std::istream& in, std::uint16_t material = 0);
SplatFile load_splats(const std::filesystem::path& path, std::uint16_t material = 0);
/// Writes the deformed splats (centers and a_g) in the same format.
void write_splats(std::ostream& out, const AppearanceSet& splats);
void save_splats(const AppearanceSet& splats, const std::filesystem::path& path);

/// Symmetric part of `cov` with eigenvalues clamped to at least `floor`.
/// Sets `repaired` when clamping changed anything.
Mat3 repair_covariance(const Mat3& cov, Real floor, bool& repaired);

/// Covariance R diag(s^2) R^T of a scaled, rotated Gaussian.
Mat3 covariance_from_scale_rotation(const Vec3& scale, const Eigen::Quaternion<Real>& rotation);

/// Physics particles driving a splat set: a deterministic uniform subsample
/// of round(ratio * N) splat centers. The occupied simulation-cell volume is
/// shared equally, so m_p = density * V / count.
ParticleSet derive_particles(const AppearanceSet& splats, Real ratio, std::uint64_t seed, Real dx, Real density);

/// Marks splats whose stencil lies inside `box` active, like
/// set_particle_activity. Returns the active indices.
std::vector<std::uint32_t> set_splat_activity(AppearanceSet& splats, const NodeBox& box, const Grid& grid);

/// One kinematic substep of the appearance set on finalized grid velocities:
/// gather, advect, F <- (I + dt C) F, projection against tools, plasticity,
/// then a_g = F A F^T. Never writes the grid.
void advect_appearance(AppearanceSet& splats, const Grid& grid, Real dt, std::span<const std::uint32_t> indices,
                       const NodeBox& box, bool clamp_to_box, const ContactWorld* contact,
                       std::span<const MaterialParams> materials);

/// Recomputes a_g = F_g A_g F_g^T for every splat.
void update_covariances(AppearanceSet& splats);

/// Gaussian volume (4 pi / 3) sqrt(det a).
Real splat_volume(const Mat3& cov);

/// max(mean(top alpha volumes) / mean(bottom alpha volumes), r) - r.
/// Throws Error on an empty set.
Real volume_ratio_metric(const AppearanceSet& splats, Real alpha_fraction = 0.1, Real r = 2);

}  // namespace putty
