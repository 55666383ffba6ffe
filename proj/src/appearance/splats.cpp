#include "putty/appearance/splats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

#include <Eigen/Eigenvalues>

#include "putty/core/random.hpp"
#include "putty/core/scene.hpp"
#include "putty/mpm/engine.hpp"
#include "putty/mpm/plasticity.hpp"

namespace putty {

namespace {

constexpr const char* kMagic = "putty-splats";
constexpr int kVersion = 1;

[[noreturn]] void bad_line(std::size_t line, const std::string& what) {
  throw ParseError("splats line " + std::to_string(line) + ": " + what);
}

}  // namespace

Mat3 repair_covariance(const Mat3& cov, Real floor, bool& repaired) {
  const Mat3 sym = (cov + cov.transpose()) / 2;
  Eigen::SelfAdjointEigenSolver<Mat3> eig(sym);
  const Vec3 lambda = eig.eigenvalues();
  repaired = !(lambda.minCoeff() >= floor) || !sym.isApprox(cov, 0);
  if (!repaired) return cov;
  return eig.eigenvectors() * lambda.cwiseMax(floor).asDiagonal() * eig.eigenvectors().transpose();
}

Mat3 covariance_from_scale_rotation(const Vec3& scale, const Eigen::Quaternion<Real>& rotation) {
  const Mat3 R = rotation.normalized().toRotationMatrix();
  return R * scale.cwiseAbs2().asDiagonal() * R.transpose();
}

SplatFile read_splats(std::istream& in, std::uint16_t material) {
  SplatFile out;
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      return true;
    }
    return false;
  };

  if (!next()) throw ParseError("splats: empty file");
  {
    std::istringstream ss(line);
    std::string magic;
    int version = 0;
    if (!(ss >> magic >> version) || magic != kMagic) bad_line(lineno, "expected 'putty-splats <version>'");
    if (version != kVersion) throw VersionError("splats: unsupported version " + std::to_string(version));
  }
  std::size_t count = 0;
  int width = 0;
  if (!next()) throw ParseError("splats: missing count line");
  {
    std::istringstream ss(line);
    std::string k1, k2;
    if (!(ss >> k1 >> count >> k2 >> width) || k1 != "count" || k2 != "payload" || width < 0)
      bad_line(lineno, "expected 'count <n> payload <width>'");
  }
  out.splats.payload_width = width;
  std::vector<float> payload(static_cast<std::size_t>(width));
  for (std::size_t i = 0; i < count; ++i) {
    if (!next()) throw ParseError("splats: expected " + std::to_string(count) + " records, got " + std::to_string(i));
    std::istringstream ss(line);
    std::string tag;
    std::uint32_t category = 0;
    Vec3 x;
    if (!(ss >> tag >> category >> x(0) >> x(1) >> x(2))) bad_line(lineno, "malformed record");
    Mat3 cov;
    if (tag == "c") {
      Real c[6];
      for (auto& v : c)
        if (!(ss >> v)) bad_line(lineno, "expected 6 covariance entries");
      cov << c[0], c[1], c[2], c[1], c[3], c[4], c[2], c[4], c[5];
    } else if (tag == "s") {
      Vec3 s;
      Real q[4];
      if (!(ss >> s(0) >> s(1) >> s(2))) bad_line(lineno, "expected 3 scales");
      for (auto& v : q)
        if (!(ss >> v)) bad_line(lineno, "expected a wxyz quaternion");
      const Eigen::Quaternion<Real> rot(q[0], q[1], q[2], q[3]);
      if (!(rot.norm() > 0)) bad_line(lineno, "zero quaternion");
      cov = covariance_from_scale_rotation(s, rot);
    } else {
      bad_line(lineno, "unknown record tag '" + tag + "'");
    }
    for (auto& p : payload)
      if (!(ss >> p)) bad_line(lineno, "expected " + std::to_string(width) + " payload values");
    std::string extra;
    if (ss >> extra) bad_line(lineno, "trailing values");
    if (!x.allFinite() || !cov.allFinite()) bad_line(lineno, "non-finite value");
    bool repaired = false;
    cov = repair_covariance(cov, 1e-8, repaired);
    if (repaired) ++out.repaired;
    out.splats.push_back(x, cov, material, category, payload);
  }
  if (next()) bad_line(lineno, "more records than the declared count");
  return out;
}

SplatFile load_splats(const std::filesystem::path& path, std::uint16_t material) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open splat file " + path.string());
  return read_splats(in, material);
}

void write_splats(std::ostream& out, const AppearanceSet& splats) {
  out << kMagic << ' ' << kVersion << '\n';
  out << "count " << splats.size() << " payload " << splats.payload_width << '\n';
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, " %.17g", v);
    out << buf;
  };
  for (std::size_t i = 0; i < splats.size(); ++i) {
    out << "c " << splats.category[i];
    for (int d = 0; d < 3; ++d) put(splats.x[i](d));
    const Mat3& a = splats.cov[i];
    for (double v : {a(0, 0), a(0, 1), a(0, 2), a(1, 1), a(1, 2), a(2, 2)}) put(v);
    for (int k = 0; k < splats.payload_width; ++k) {
      std::snprintf(buf, sizeof buf, " %.9g", static_cast<double>(splats.payload[i * splats.payload_width + k]));
      out << buf;
    }
    out << '\n';
  }
}

void save_splats(const AppearanceSet& splats, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write splat file " + path.string());
  write_splats(out, splats);
}

ParticleSet derive_particles(const AppearanceSet& splats, Real ratio, std::uint64_t seed, Real dx, Real density) {
  if (!(ratio > 0 && ratio <= 1)) throw ValidationError("ratio", "must lie in (0, 1]");
  ParticleSet out;
  const std::size_t n = splats.size();
  if (n == 0) return out;
  const auto count = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ratio * static_cast<Real>(n))));

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (count < n) {
    const CounterRng rng(seed);
    std::vector<std::uint64_t> key(n);
    for (std::size_t i = 0; i < n; ++i) key[i] = rng.bits(i, 0x5a);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] != key[b] ? key[a] < key[b] : a < b; });
    order.resize(count);
    std::sort(order.begin(), order.end());
  }

  std::set<std::tuple<long, long, long>> cells;
  for (const auto& x : splats.x)
    cells.emplace(std::lround(std::floor(x(0) / dx)), std::lround(std::floor(x(1) / dx)), std::lround(std::floor(x(2) / dx)));
  const Real volume = static_cast<Real>(cells.size()) * dx * dx * dx;
  const Real v0 = volume / static_cast<Real>(count);
  out.reserve(count);
  for (auto i : order) out.push_back(splats.x[i], density * v0, v0, splats.material[i], splats.category[i]);
  return out;
}

std::vector<std::uint32_t> set_splat_activity(AppearanceSet& splats, const NodeBox& box, const Grid& grid) {
  const auto [lo, hi] = position_range(box, grid.dx);
  std::vector<std::uint32_t> active;
  active.reserve(splats.size());
  for (std::size_t i = 0; i < splats.size(); ++i) {
    const Vec3& x = splats.x[i];
    const bool inside = (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
    splats.active[i] = inside ? 1 : 0;
    if (inside) {
      active.push_back(static_cast<std::uint32_t>(i));
    } else {
      splats.v[i].setZero();
      splats.C[i].setZero();
    }
  }
  return active;
}

void advect_appearance(AppearanceSet& splats, const Grid& grid, Real dt, std::span<const std::uint32_t> indices,
                       const NodeBox& box, bool clamp_to_box, const ContactWorld* contact,
                       std::span<const MaterialParams> materials) {
  const auto [lo, hi] = particle_bounds(grid.n, grid.dx);
  const auto [rlo, rhi] = position_range(box, grid.dx);
  for (const auto i : indices) {
    Vec3 v;
    Mat3 C;
    gather_velocity(grid, splats.x[i], v, C);
    splats.v[i] = v;
    splats.C[i] = C;
    Vec3 x = (splats.x[i] + dt * v).cwiseMax(lo).cwiseMin(hi);
    if (clamp_to_box) x = x.cwiseMax(rlo).cwiseMin(rhi);
    splats.x[i] = x;
    splats.F[i] = (Mat3::Identity() + dt * C) * splats.F[i];
  }
  if (contact && !contact->empty()) adjust_points(splats.x, splats.v, indices, *contact);
  for (const auto i : indices) {
    const MaterialParams& m = materials[splats.material[i]];
    if (!std::holds_alternative<NoPlasticity>(m.plasticity)) splats.F[i] = putty::apply_plasticity<Real>(splats.F[i], m);
    splats.cov[i] = splats.F[i] * splats.rest_cov[i] * splats.F[i].transpose();
  }
}

void update_covariances(AppearanceSet& splats) {
  for (std::size_t i = 0; i < splats.size(); ++i) splats.cov[i] = splats.F[i] * splats.rest_cov[i] * splats.F[i].transpose();
}

Real splat_volume(const Mat3& cov) {
  return 4.0 / 3.0 * std::numbers::pi * std::sqrt(std::max(Real(0), cov.determinant()));
}

Real volume_ratio_metric(const AppearanceSet& splats, Real alpha_fraction, Real r) {
  if (splats.empty()) throw Error("volume ratio: empty splat set");
  if (!(alpha_fraction > 0 && alpha_fraction <= 0.5)) throw ValidationError("alpha_fraction", "must lie in (0, 0.5]");
  std::vector<Real> vol(splats.size());
  for (std::size_t i = 0; i < vol.size(); ++i) vol[i] = splat_volume(splats.cov[i]);
  std::sort(vol.begin(), vol.end());
  const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(alpha_fraction * vol.size())));
  Real bottom = 0, top = 0;
  for (std::size_t i = 0; i < k; ++i) {
    bottom += vol[i];
    top += vol[vol.size() - 1 - i];
  }
  if (!(bottom > 0)) return std::numeric_limits<Real>::infinity();
  return std::max(top / bottom, r) - r;
}

}  // namespace putty
