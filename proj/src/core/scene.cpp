#include "putty/core/scene.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "putty/core/random.hpp"

namespace putty {

using nlohmann::json;

namespace {

Vec3 vec_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3) throw ValidationError(field, "expected a 3-element array");
  Vec3 v;
  for (int d = 0; d < 3; ++d) {
    if (!j[d].is_number()) throw ValidationError(field, "expected numbers");
    v(d) = j[d].get<Real>();
  }
  return v;
}

json vec_to_json(const Vec3& v) { return json::array({v(0), v(1), v(2)}); }

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& field) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(field + "." + key, "wrong type");
  }
}

ShapeKind shape_kind_from(const std::string& s, const std::string& field) {
  if (s == "sphere") return ShapeKind::Sphere;
  if (s == "box") return ShapeKind::Box;
  if (s == "torus") return ShapeKind::Torus;
  if (s == "cylinder") return ShapeKind::Cylinder;
  throw ValidationError(field, "unknown shape type '" + s + "'");
}

const char* shape_kind_name(ShapeKind k) {
  switch (k) {
    case ShapeKind::Sphere: return "sphere";
    case ShapeKind::Box: return "box";
    case ShapeKind::Torus: return "torus";
    case ShapeKind::Cylinder: return "cylinder";
  }
  return "sphere";
}

}  // namespace

bool ShapeSpec::contains(const Vec3& p) const {
  const Vec3 q = p - center;
  switch (kind) {
    case ShapeKind::Sphere:
      return q.squaredNorm() <= radius * radius;
    case ShapeKind::Box:
      return (q.cwiseAbs().array() <= half_extents.array()).all();
    case ShapeKind::Torus: {
      const Real ring = std::hypot(q(0), q(2)) - radius;
      return ring * ring + q(1) * q(1) <= minor_radius * minor_radius;
    }
    case ShapeKind::Cylinder:
      return q(0) * q(0) + q(2) * q(2) <= radius * radius && std::abs(q(1)) <= half_height;
  }
  return false;
}

std::pair<Vec3, Vec3> ShapeSpec::bounds() const {
  Vec3 ext;
  switch (kind) {
    case ShapeKind::Sphere: ext = Vec3::Constant(radius); break;
    case ShapeKind::Box: ext = half_extents; break;
    case ShapeKind::Torus: ext = Vec3(radius + minor_radius, minor_radius, radius + minor_radius); break;
    case ShapeKind::Cylinder: ext = Vec3(radius, half_height, radius); break;
  }
  return {center - ext, center + ext};
}

Real default_dt(int grid_resolution, Real domain_side) {
  return 1e-4 * (64.0 / grid_resolution) * domain_side;
}

std::pair<Real, Real> particle_bounds(int grid_resolution, Real dx) {
  return {dx, (grid_resolution - 2) * dx};
}

MaterialParams material_from_json(const json& j) {
  MaterialParams m;
  const std::string field = "material";
  m.name = get_or<std::string>(j, "name", m.name, field);
  if (j.contains("youngs")) {
    const Real E = get_or<Real>(j, "youngs", 0, field);
    const Real nu = get_or<Real>(j, "poisson", 0.3, field);
    if (!(nu > -1 && nu < 0.5)) throw ValidationError(field + ".poisson", "must lie in (-1, 0.5)");
    m.mu = E / (2 * (1 + nu));
    m.lambda = E * nu / ((1 + nu) * (1 - 2 * nu));
  }
  m.mu = get_or<Real>(j, "mu", m.mu, field);
  m.lambda = get_or<Real>(j, "lambda", m.lambda, field);
  m.density = get_or<Real>(j, "density", m.density, field);
  const auto stress = get_or<std::string>(j, "stress", "neohookean", field);
  if (stress == "neohookean") m.stress_model = StressModel::NeoHookean;
  else if (stress == "corotated") m.stress_model = StressModel::Corotated;
  else throw ValidationError(field + ".stress", "unknown stress model '" + stress + "'");

  if (j.contains("plasticity")) {
    const json& p = j.at("plasticity");
    const auto type = get_or<std::string>(p, "type", "none", field + ".plasticity");
    if (type == "none") m.plasticity = NoPlasticity{};
    else if (type == "drucker_prager") m.plasticity = DruckerPrager{get_or<Real>(p, "alpha", 0.2, field)};
    else if (type == "von_mises") m.plasticity = VonMises{get_or<Real>(p, "tau_y", 1000, field)};
    else if (type == "clamp")
      m.plasticity = ClampPlasticity{get_or<Real>(p, "sigma_min", 1 - 2.5e-2, field),
                                     get_or<Real>(p, "sigma_max", 1 + 7.5e-3, field)};
    else throw ValidationError(field + ".plasticity.type", "unknown plasticity model '" + type + "'");
  }
  return m;
}

json material_to_json(const MaterialParams& m) {
  json j{{"name", m.name},
         {"mu", m.mu},
         {"lambda", m.lambda},
         {"density", m.density},
         {"stress", m.stress_model == StressModel::NeoHookean ? "neohookean" : "corotated"}};
  j["plasticity"] = std::visit(
      [](const auto& p) -> json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, DruckerPrager>) return {{"type", "drucker_prager"}, {"alpha", p.alpha}};
        else if constexpr (std::is_same_v<T, VonMises>) return {{"type", "von_mises"}, {"tau_y", p.tau_y}};
        else if constexpr (std::is_same_v<T, ClampPlasticity>)
          return {{"type", "clamp"}, {"sigma_min", p.sigma_min}, {"sigma_max", p.sigma_max}};
        else return {{"type", "none"}};
      },
      m.plasticity);
  return j;
}

SceneConfig scene_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("scene", "expected an object");
  SceneConfig c;
  const std::string f = "scene";
  c.domain_side = get_or<Real>(j, "domain", c.domain_side, f);
  c.grid_resolution = get_or<int>(j, "grid", c.grid_resolution, f);
  c.particles_per_cell = get_or<int>(j, "ppc", c.particles_per_cell, f);
  c.substeps_per_frame = get_or<int>(j, "substeps", c.substeps_per_frame, f);
  c.dt = get_or<Real>(j, "dt", default_dt(c.grid_resolution, c.domain_side), f);
  c.frame_interval = get_or<Real>(j, "frame_interval", c.frame_interval, f);
  if (j.contains("gravity")) c.gravity = vec_from_json(j.at("gravity"), "gravity");
  c.damping = get_or<Real>(j, "damping", c.damping, f);
  const auto walls = get_or<std::string>(j, "walls", "slip", f);
  if (walls == "slip") c.walls = WallCondition::Slip;
  else if (walls == "sticky") c.walls = WallCondition::Sticky;
  else throw ValidationError("walls", "expected 'slip' or 'sticky'");
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed, f);

  if (j.contains("materials")) {
    c.materials.clear();
    for (const auto& m : j.at("materials")) c.materials.push_back(material_from_json(m));
  }

  if (j.contains("shapes")) {
    const auto& shapes = j.at("shapes");
    if (!shapes.is_array()) throw ValidationError("shapes", "expected an array");
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      const json& s = shapes[i];
      const std::string sf = "shapes[" + std::to_string(i) + "]";
      ShapeSpec shape;
      shape.kind = shape_kind_from(get_or<std::string>(s, "type", "sphere", sf), sf + ".type");
      if (s.contains("center")) shape.center = vec_from_json(s.at("center"), sf + ".center");
      shape.radius = get_or<Real>(s, "radius", shape.radius, sf);
      shape.minor_radius = get_or<Real>(s, "minor_radius", shape.minor_radius, sf);
      shape.half_height = get_or<Real>(s, "half_height", shape.half_height, sf);
      if (s.contains("half_extents")) shape.half_extents = vec_from_json(s.at("half_extents"), sf + ".half_extents");
      if (s.contains("material") && s.at("material").is_string()) {
        const auto name = s.at("material").get<std::string>();
        bool found = false;
        for (std::size_t m = 0; m < c.materials.size(); ++m)
          if (c.materials[m].name == name) {
            shape.material = static_cast<std::uint16_t>(m);
            found = true;
          }
        if (!found) throw ValidationError(sf + ".material", "unknown material '" + name + "'");
      } else {
        shape.material = get_or<std::uint16_t>(s, "material", 0, sf);
      }
      shape.category = get_or<std::uint32_t>(s, "category", static_cast<std::uint32_t>(i), sf);
      c.shapes.push_back(shape);
    }
  }

  if (j.contains("contact")) {
    const json& k = j.at("contact");
    c.contact.pressure_stiffness = get_or<Real>(k, "k_p", c.contact.pressure_stiffness, "contact");
    c.contact.friction = get_or<Real>(k, "mu_f", c.contact.friction, "contact");
  }
  if (j.contains("surfacing")) {
    const json& s = j.at("surfacing");
    c.surfacing.resolution = get_or<int>(s, "resolution", c.surfacing.resolution, "surfacing");
    if (s.contains("iso") && !s.at("iso").is_null()) c.surfacing.iso = get_or<Real>(s, "iso", 0, "surfacing");
    c.surfacing.smoothing_iterations = get_or<int>(s, "smoothing_iterations", c.surfacing.smoothing_iterations, "surfacing");
    c.surfacing.smoothing_strength = get_or<Real>(s, "smoothing_strength", c.surfacing.smoothing_strength, "surfacing");
    c.surfacing.cadence = get_or<int>(s, "cadence", c.surfacing.cadence, "surfacing");
  }
  if (j.contains("localized")) {
    const json& l = j.at("localized");
    c.localized.enabled = get_or<bool>(l, "enabled", c.localized.enabled, "localized");
    c.localized.half_side = get_or<Real>(l, "half_side", c.localized.half_side, "localized");
  }
  if (j.contains("tools")) {
    const json& t = j.at("tools");
    c.left_tool = get_or<std::string>(t, "left", c.left_tool, "tools");
    c.right_tool = get_or<std::string>(t, "right", c.right_tool, "tools");
  }
  validate(c);
  return c;
}

json scene_to_json(const SceneConfig& c) {
  json j;
  j["domain"] = c.domain_side;
  j["grid"] = c.grid_resolution;
  j["ppc"] = c.particles_per_cell;
  j["substeps"] = c.substeps_per_frame;
  j["dt"] = c.dt;
  j["frame_interval"] = c.frame_interval;
  j["gravity"] = vec_to_json(c.gravity);
  j["damping"] = c.damping;
  j["walls"] = c.walls == WallCondition::Slip ? "slip" : "sticky";
  j["seed"] = c.seed;
  j["materials"] = json::array();
  for (const auto& m : c.materials) j["materials"].push_back(material_to_json(m));
  j["shapes"] = json::array();
  for (const auto& s : c.shapes) {
    json sj{{"type", shape_kind_name(s.kind)},
            {"center", vec_to_json(s.center)},
            {"material", s.material},
            {"category", s.category}};
    switch (s.kind) {
      case ShapeKind::Sphere: sj["radius"] = s.radius; break;
      case ShapeKind::Box: sj["half_extents"] = vec_to_json(s.half_extents); break;
      case ShapeKind::Torus:
        sj["radius"] = s.radius;
        sj["minor_radius"] = s.minor_radius;
        break;
      case ShapeKind::Cylinder:
        sj["radius"] = s.radius;
        sj["half_height"] = s.half_height;
        break;
    }
    j["shapes"].push_back(sj);
  }
  j["contact"] = {{"k_p", c.contact.pressure_stiffness}, {"mu_f", c.contact.friction}};
  j["surfacing"] = {{"resolution", c.surfacing.resolution},
                    {"iso", c.surfacing.iso ? json(*c.surfacing.iso) : json(nullptr)},
                    {"smoothing_iterations", c.surfacing.smoothing_iterations},
                    {"smoothing_strength", c.surfacing.smoothing_strength},
                    {"cadence", c.surfacing.cadence}};
  j["localized"] = {{"enabled", c.localized.enabled}, {"half_side", c.localized.half_side}};
  j["tools"] = {{"left", c.left_tool}, {"right", c.right_tool}};
  return j;
}

void validate(const SceneConfig& c) {
  if (!(c.domain_side > 0)) throw ValidationError("domain", "must be > 0");
  if (c.grid_resolution < 8) throw ValidationError("grid", "must be >= 8");
  if (c.particles_per_cell < 1) throw ValidationError("ppc", "must be >= 1");
  if (c.substeps_per_frame < 1) throw ValidationError("substeps", "must be >= 1");
  if (!(c.dt > 0)) throw ValidationError("dt", "must be > 0");
  if (!(c.frame_interval > 0)) throw ValidationError("frame_interval", "must be > 0");
  if (!(c.damping >= 0)) throw ValidationError("damping", "must be >= 0");
  if (c.materials.empty()) throw ValidationError("materials", "at least one material is required");
  for (std::size_t m = 0; m < c.materials.size(); ++m)
    validate(c.materials[m], "materials[" + std::to_string(m) + "]");
  for (std::size_t i = 0; i < c.shapes.size(); ++i) {
    const auto& s = c.shapes[i];
    const std::string f = "shapes[" + std::to_string(i) + "]";
    if (s.material >= c.materials.size()) throw ValidationError(f + ".material", "index out of range");
    const bool sized = s.kind == ShapeKind::Box ? (s.half_extents.array() > 0).all()
                                                : s.radius > 0 && (s.kind != ShapeKind::Torus || s.minor_radius > 0) &&
                                                      (s.kind != ShapeKind::Cylinder || s.half_height > 0);
    if (!sized) throw ValidationError(f, "shape dimensions must be positive");
    const auto [lo, hi] = s.bounds();
    if ((lo.array() < 0).any() || (hi.array() > c.domain_side).any())
      throw ValidationError(f, "shape outside domain");
  }
  if (!(c.contact.pressure_stiffness >= 0)) throw ValidationError("contact.k_p", "must be >= 0");
  if (!(c.contact.friction >= 0)) throw ValidationError("contact.mu_f", "must be >= 0");
  if (c.surfacing.resolution < 8) throw ValidationError("surfacing.resolution", "must be >= 8");
  if (c.surfacing.iso && !(*c.surfacing.iso > 0)) throw ValidationError("surfacing.iso", "must be > 0");
  if (c.surfacing.smoothing_iterations < 0) throw ValidationError("surfacing.smoothing_iterations", "must be >= 0");
  if (c.surfacing.cadence < 1) throw ValidationError("surfacing.cadence", "must be >= 1");
  if (!(c.localized.half_side > 0)) throw ValidationError("localized.half_side", "must be > 0");
}

SceneConfig parse_scene(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("scene: ") + e.what());
  }
  return scene_from_json(j);
}

SceneConfig load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open scene file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scene(ss.str());
}

ParticleSet seed_particles(const SceneConfig& config) {
  ParticleSet out;
  if (config.shapes.empty()) return out;
  const int n = config.grid_resolution;
  const Real dx = config.dx();
  const int ppc = config.particles_per_cell;
  const Real vol = dx * dx * dx / ppc;
  const auto [lo, hi] = particle_bounds(n, dx);
  const CounterRng rng(config.seed);

  // stratified jitter when ppc is a perfect cube
  int strata = 1;
  while ((strata + 1) * (strata + 1) * (strata + 1) <= ppc) ++strata;
  const bool stratified = strata * strata * strata == ppc;

  Vec3 bmin = Vec3::Constant(config.domain_side);
  Vec3 bmax = Vec3::Zero();
  for (const auto& s : config.shapes) {
    const auto [a, b] = s.bounds();
    bmin = bmin.cwiseMin(a);
    bmax = bmax.cwiseMax(b);
  }
  Vec3i cmin, cmax;
  for (int d = 0; d < 3; ++d) {
    cmin(d) = std::max(0, static_cast<int>(std::floor(bmin(d) / dx)));
    cmax(d) = std::min(n - 1, static_cast<int>(std::floor(bmax(d) / dx)));
  }

  for (int k = cmin(2); k <= cmax(2); ++k)
    for (int j = cmin(1); j <= cmax(1); ++j)
      for (int i = cmin(0); i <= cmax(0); ++i) {
        const std::uint64_t cell = static_cast<std::uint64_t>(i) + static_cast<std::uint64_t>(n) * (j + static_cast<std::uint64_t>(n) * k);
        for (int s = 0; s < ppc; ++s) {
          Vec3 local;
          for (int d = 0; d < 3; ++d) local(d) = rng.uniform(cell, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(d));
          if (stratified) {
            const Vec3 sub(s % strata, (s / strata) % strata, s / (strata * strata));
            local = (sub + local) / strata;
          }
          const Vec3 p = (Vec3(i, j, k) + local) * dx;
          if ((p.array() < lo).any() || (p.array() > hi).any()) continue;
          for (const auto& shape : config.shapes) {
            if (!shape.contains(p)) continue;
            const Real m = config.materials[shape.material].density * vol;
            out.push_back(p, m, vol, shape.material, shape.category);
            break;
          }
        }
      }
  return out;
}

}  // namespace putty
