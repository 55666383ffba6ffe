#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "putty/surfacing/mesh.hpp"

namespace putty {

enum class MeshFormat { Obj, Ply };

/// Picks the format from the extension (.obj / .ply); ValidationError otherwise.
MeshFormat mesh_format_for(const std::filesystem::path& path);

/// ASCII OBJ: one "g category_<id>" group per mesh, then its "v" lines
/// (%.9g) and 1-based "f" lines indexing the file-wide vertex list.
void write_obj(std::ostream& out, std::span<const SurfaceMesh> meshes);
std::vector<SurfaceMesh> read_obj(std::istream& in);

/// Binary little-endian PLY with float32 vertices, uchar-counted uint32 face
/// lists and a per-face uint32 category.
void write_ply(std::ostream& out, std::span<const SurfaceMesh> meshes);
std::vector<SurfaceMesh> read_ply(std::istream& in);

void export_meshes(std::span<const SurfaceMesh> meshes, const std::filesystem::path& path);
std::vector<SurfaceMesh> import_meshes(const std::filesystem::path& path);

}  // namespace putty
