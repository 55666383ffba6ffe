#include "putty/surfacing/mesh_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace putty {

MeshFormat mesh_format_for(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".obj" || ext == ".OBJ") return MeshFormat::Obj;
  if (ext == ".ply" || ext == ".PLY") return MeshFormat::Ply;
  throw ValidationError("output", "unsupported mesh extension '" + ext + "' (use .obj or .ply)");
}

// ---------------------------------------------------------------------------
// OBJ

void write_obj(std::ostream& out, std::span<const SurfaceMesh> meshes) {
  out << "# putty mesh\n";
  char buf[128];
  std::size_t offset = 1;
  for (const auto& m : meshes) {
    out << "g category_" << m.category << '\n';
    for (const auto& v : m.vertices) {
      std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
      out << buf;
    }
    for (const auto& t : m.triangles) out << "f " << t[0] + offset << ' ' << t[1] + offset << ' ' << t[2] + offset << '\n';
    offset += m.vertices.size();
  }
}

std::vector<SurfaceMesh> read_obj(std::istream& in) {
  std::vector<SurfaceMesh> meshes;
  std::size_t offset = 1;  // global index of the current group's first vertex
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) { throw ParseError("obj line " + std::to_string(lineno) + ": " + what); };
  auto current = [&]() -> SurfaceMesh& {
    if (meshes.empty()) meshes.emplace_back();
    return meshes.back();
  };
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "g" || tag == "o") {
      std::string name;
      ls >> name;
      SurfaceMesh m;
      if (name.rfind("category_", 0) == 0) {
        try {
          m.category = static_cast<std::uint32_t>(std::stoul(name.substr(9)));
        } catch (const std::exception&) {
          fail("bad group name '" + name + "'");
        }
      }
      if (!meshes.empty()) offset += meshes.back().vertices.size();
      meshes.push_back(m);
    } else if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z())) fail("expected three coordinates");
      current().vertices.push_back(v);
    } else if (tag == "f") {
      auto& m = current();
      std::vector<std::uint32_t> idx;
      std::string tok;
      while (ls >> tok) {
        long i = 0;
        try {
          i = std::stol(tok.substr(0, tok.find('/')));
        } catch (const std::exception&) {
          fail("bad face index '" + tok + "'");
        }
        const long local = i < 0 ? static_cast<long>(m.vertices.size()) + i : i - static_cast<long>(offset);
        if (local < 0 || local >= static_cast<long>(m.vertices.size())) fail("face index out of the group's range");
        idx.push_back(static_cast<std::uint32_t>(local));
      }
      if (idx.size() < 3) fail("face needs three vertices");
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) m.triangles.push_back({idx[0], idx[k], idx[k + 1]});
    }
  }
  return meshes;
}

// ---------------------------------------------------------------------------
// PLY

namespace {

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(sizeof(T) == 4);
  std::uint32_t bits;
  std::memcpy(&bits, &value, 4);
  const char bytes[4] = {char(bits & 0xff), char((bits >> 8) & 0xff), char((bits >> 16) & 0xff), char(bits >> 24)};
  out.write(bytes, 4);
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw ParseError("ply: truncated body");
  const std::uint32_t bits = b[0] | (b[1] << 8) | (b[2] << 16) | (std::uint32_t(b[3]) << 24);
  T value;
  std::memcpy(&value, &bits, 4);
  return value;
}

const char* const kPlyHeader[] = {
    "ply", "format binary_little_endian 1.0", "comment putty mesh", nullptr,  // element vertex
    "property float x", "property float y", "property float z", "property uint category", nullptr,  // element face
    "property list uchar uint vertex_indices", "property uint category", "end_header"};

}  // namespace

void write_ply(std::ostream& out, std::span<const SurfaceMesh> meshes) {
  std::size_t nv = 0, nf = 0;
  for (const auto& m : meshes) {
    nv += m.vertices.size();
    nf += m.triangles.size();
  }
  out << "ply\nformat binary_little_endian 1.0\ncomment putty mesh\n";
  out << "element vertex " << nv << "\nproperty float x\nproperty float y\nproperty float z\nproperty uint category\n";
  out << "element face " << nf << "\nproperty list uchar uint vertex_indices\nproperty uint category\nend_header\n";
  for (const auto& m : meshes)
    for (const auto& v : m.vertices) {
      for (int d = 0; d < 3; ++d) put_le(out, static_cast<float>(v(d)));
      put_le(out, m.category);
    }
  std::uint32_t offset = 0;
  for (const auto& m : meshes) {
    for (const auto& t : m.triangles) {
      out.put(3);
      for (auto i : t) put_le(out, i + offset);
      put_le(out, m.category);
    }
    offset += static_cast<std::uint32_t>(m.vertices.size());
  }
}

std::vector<SurfaceMesh> read_ply(std::istream& in) {
  std::string line;
  std::size_t nv = 0, nf = 0;
  for (const char* expected : kPlyHeader) {
    if (!std::getline(in, line)) throw ParseError("ply: truncated header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (expected) {
      if (line != expected) throw ParseError("ply: unsupported header line '" + line + "'");
      continue;
    }
    std::istringstream ls(line);
    std::string element, name;
    std::size_t count = 0;
    if (!(ls >> element >> name >> count) || element != "element") throw ParseError("ply: expected an element line");
    if (name == "vertex" && nv == 0) nv = count;
    else if (name == "face") nf = count;
    else throw ParseError("ply: unexpected element '" + name + "'");
  }
  std::vector<SurfaceMesh> meshes;
  std::vector<std::pair<std::size_t, std::uint32_t>> where(nv);  // mesh slot, local index
  for (std::size_t i = 0; i < nv; ++i) {
    Vec3 v;
    for (int d = 0; d < 3; ++d) v(d) = get_le<float>(in);
    const auto cat = get_le<std::uint32_t>(in);
    if (meshes.empty() || meshes.back().category != cat) {
      meshes.emplace_back();
      meshes.back().category = cat;
    }
    where[i] = {meshes.size() - 1, static_cast<std::uint32_t>(meshes.back().vertices.size())};
    meshes.back().vertices.push_back(v);
  }
  for (std::size_t f = 0; f < nf; ++f) {
    char count = 0;
    if (!in.get(count)) throw ParseError("ply: truncated body");
    if (count != 3) throw ParseError("ply: only triangles are supported");
    Triangle t;
    std::size_t slot = 0;
    for (int k = 0; k < 3; ++k) {
      const auto i = get_le<std::uint32_t>(in);
      if (i >= nv) throw ParseError("ply: face index out of range");
      if (k > 0 && where[i].first != slot) throw ParseError("ply: face spans categories");
      slot = where[i].first;
      t[k] = where[i].second;
    }
    if (get_le<std::uint32_t>(in) != meshes[slot].category) throw ParseError("ply: face category mismatch");
    meshes[slot].triangles.push_back(t);
  }
  return meshes;
}

void export_meshes(std::span<const SurfaceMesh> meshes, const std::filesystem::path& path) {
  const auto format = mesh_format_for(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write mesh file " + path.string());
  if (format == MeshFormat::Obj) write_obj(out, meshes);
  else write_ply(out, meshes);
  if (!out) throw Error("failed writing mesh file " + path.string());
}

std::vector<SurfaceMesh> import_meshes(const std::filesystem::path& path) {
  const auto format = mesh_format_for(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open mesh file " + path.string());
  return format == MeshFormat::Obj ? read_obj(in) : read_ply(in);
}

}  // namespace putty
