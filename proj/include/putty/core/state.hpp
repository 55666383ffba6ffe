#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "putty/core/types.hpp"

namespace putty {

/// Rendering particles driven kinematically by the simulation grid.
struct AppearanceSet {
  std::vector<Vec3> x;
  std::vector<Vec3> v;
  std::vector<Mat3> rest_cov;  // A_g, material space
  std::vector<Mat3> cov;       // a_g = F_g A_g F_g^T
  std::vector<Mat3> F;
  std::vector<Mat3> C;
  std::vector<std::uint16_t> material;
  std::vector<std::uint32_t> category;
  std::vector<std::uint8_t> active;
  int payload_width = 0;
  std::vector<float> payload;  // payload_width floats per splat, opaque

  std::size_t size() const noexcept { return x.size(); }
  bool empty() const noexcept { return x.empty(); }
  void push_back(const Vec3& pos, const Mat3& rest_covariance, std::uint16_t mat, std::uint32_t cat,
                 std::span<const float> extra);
  void push_copy(const AppearanceSet& other, std::size_t i);
  template <typename Pred>
  void retain(Pred keep);

  bool operator==(const AppearanceSet&) const = default;
};

template <typename Pred>
void AppearanceSet::retain(Pred keep) {
  AppearanceSet out;
  out.payload_width = payload_width;
  for (std::size_t i = 0; i < size(); ++i)
    if (keep(i)) out.push_copy(*this, i);
  *this = std::move(out);
}

/// A logical object: a set of particle categories that edits act on together.
struct SceneObject {
  std::uint32_t id = 0;
  std::vector<std::uint32_t> categories;
  bool operator==(const SceneObject&) const = default;
};

struct SimState {
  ParticleSet particles;
  AppearanceSet appearance;
  std::vector<SceneObject> objects;
  std::uint64_t frame = 0;
  Real time = 0;
  std::uint32_t next_object_id = 0;
  std::uint32_t next_category = 0;

  /// Builds one object per distinct particle category.
  void rebuild_objects();
  const SceneObject* find_object(std::uint32_t id) const;

  bool operator==(const SimState&) const = default;
};

struct Snapshot {
  static constexpr std::uint32_t kMagic = 0x53595450;  // "PTYS"
  static constexpr std::uint32_t kVersion = 1;

  std::uint64_t id = 0;
  double timestamp = 0;
  SimState state;

  bool operator==(const Snapshot&) const = default;
};

std::vector<std::uint8_t> encode_snapshot(const Snapshot& snapshot);
/// Throws VersionError for an unknown schema version and ParseError for a
/// truncated or corrupt payload.
Snapshot decode_snapshot(std::span<const std::uint8_t> bytes);

void save_snapshot(const Snapshot& snapshot, const std::filesystem::path& path);
Snapshot load_snapshot(const std::filesystem::path& path);

}  // namespace putty
