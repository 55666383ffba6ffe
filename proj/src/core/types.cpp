#include "putty/core/types.hpp"

#include <numeric>

namespace putty {

void validate(const MaterialParams& m, const std::string& field) {
  if (!(m.mu > 0)) throw ValidationError(field + ".mu", "must be > 0");
  if (!(m.lambda >= 0)) throw ValidationError(field + ".lambda", "must be >= 0");
  if (!(m.density > 0)) throw ValidationError(field + ".density", "must be > 0");
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, DruckerPrager>) {
          if (!(p.alpha >= 0)) throw ValidationError(field + ".plasticity.alpha", "must be >= 0");
        } else if constexpr (std::is_same_v<T, VonMises>) {
          if (!(p.tau_y >= 0)) throw ValidationError(field + ".plasticity.tau_y", "must be >= 0");
        } else if constexpr (std::is_same_v<T, ClampPlasticity>) {
          if (!(p.sigma_min > 0 && p.sigma_min <= 1 && p.sigma_max >= 1))
            throw ValidationError(field + ".plasticity", "requires 0 < sigma_min <= 1 <= sigma_max");
        }
      },
      m.plasticity);
}

void ParticleSet::reserve(std::size_t n) {
  x.reserve(n);
  v.reserve(n);
  mass.reserve(n);
  volume0.reserve(n);
  F.reserve(n);
  C.reserve(n);
  material.reserve(n);
  category.reserve(n);
  active.reserve(n);
}

void ParticleSet::clear() {
  retain([](std::size_t) { return false; });
}

void ParticleSet::push_back(const Vec3& pos, Real m, Real vol, std::uint16_t mat, std::uint32_t cat) {
  x.push_back(pos);
  v.push_back(Vec3::Zero());
  mass.push_back(m);
  volume0.push_back(vol);
  F.push_back(Mat3::Identity());
  C.push_back(Mat3::Zero());
  material.push_back(mat);
  category.push_back(cat);
  active.push_back(1);
}

void ParticleSet::push_copy(const ParticleSet& o, std::size_t i) {
  x.push_back(o.x[i]);
  v.push_back(o.v[i]);
  mass.push_back(o.mass[i]);
  volume0.push_back(o.volume0[i]);
  F.push_back(o.F[i]);
  C.push_back(o.C[i]);
  material.push_back(o.material[i]);
  category.push_back(o.category[i]);
  active.push_back(o.active[i]);
}

Real ParticleSet::total_mass() const { return std::accumulate(mass.begin(), mass.end(), Real(0)); }

Grid::Grid(int resolution, Real domain_side)
    : n(resolution), dx(domain_side / resolution) {
  const auto count = static_cast<std::size_t>(n) * n * n;
  mass.assign(count, 0);
  momentum.assign(count, Vec3::Zero());
  force.assign(count, Vec3::Zero());
}

void Grid::clear() {
  std::fill(mass.begin(), mass.end(), Real(0));
  std::fill(momentum.begin(), momentum.end(), Vec3::Zero());
  std::fill(force.begin(), force.end(), Vec3::Zero());
}

}  // namespace putty
