#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace putty {

using Real = double;

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

using Vec3 = Vector3<Real>;
using Mat3 = Matrix3<Real>;
using Vec3i = Eigen::Vector3i;

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

/// Raised for semantically invalid input; field() names the offending entry.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

class SingularConfigurationError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Materials

enum class StressModel { NeoHookean, Corotated };

struct NoPlasticity {};
struct DruckerPrager {
  Real alpha = 0;
};
struct VonMises {
  Real tau_y = 0;
};
struct ClampPlasticity {
  Real sigma_min = 1;
  Real sigma_max = 1;
};

using PlasticityModel = std::variant<NoPlasticity, DruckerPrager, VonMises, ClampPlasticity>;

struct MaterialParams {
  std::string name = "clay";
  Real mu = 3.85e4;
  Real lambda = 5.77e4;
  Real density = 1000;
  StressModel stress_model = StressModel::NeoHookean;
  PlasticityModel plasticity = VonMises{1000};
};

/// Throws ValidationError naming `field` if the parameters are inadmissible.
void validate(const MaterialParams& m, const std::string& field);

// ---------------------------------------------------------------------------
// Particles

/// Structure-of-arrays particle state.
struct ParticleSet {
  std::vector<Vec3> x;
  std::vector<Vec3> v;
  std::vector<Real> mass;
  std::vector<Real> volume0;
  std::vector<Mat3> F;
  std::vector<Mat3> C;
  std::vector<std::uint16_t> material;
  std::vector<std::uint32_t> category;
  std::vector<std::uint8_t> active;

  std::size_t size() const noexcept { return x.size(); }
  bool empty() const noexcept { return x.empty(); }

  void reserve(std::size_t n);
  void clear();
  /// Appends a particle at rest with F = I and C = 0.
  void push_back(const Vec3& pos, Real m, Real vol, std::uint16_t mat, std::uint32_t cat);
  /// Appends a copy of particle `i` from `other`.
  void push_copy(const ParticleSet& other, std::size_t i);
  /// Keeps only particles whose predicate returns true, preserving order.
  template <typename Pred>
  void retain(Pred keep);

  Real total_mass() const;

  bool operator==(const ParticleSet&) const = default;
};

template <typename Pred>
void ParticleSet::retain(Pred keep) {
  std::size_t out = 0;
  for (std::size_t i = 0; i < size(); ++i) {
    if (!keep(i)) continue;
    if (out != i) {
      x[out] = x[i];
      v[out] = v[i];
      mass[out] = mass[i];
      volume0[out] = volume0[i];
      F[out] = F[i];
      C[out] = C[i];
      material[out] = material[i];
      category[out] = category[i];
      active[out] = active[i];
    }
    ++out;
  }
  x.resize(out);
  v.resize(out);
  mass.resize(out);
  volume0.resize(out);
  F.resize(out);
  C.resize(out);
  material.resize(out);
  category.resize(out);
  active.resize(out);
}

// ---------------------------------------------------------------------------
// Grid

/// Inclusive node index box.
struct NodeBox {
  Vec3i lo = Vec3i::Zero();
  Vec3i hi = Vec3i::Zero();

  bool contains(const Vec3i& node) const {
    return (node.array() >= lo.array()).all() && (node.array() <= hi.array()).all();
  }
  bool operator==(const NodeBox&) const = default;
};

/// Dense background grid. Node (i,j,k) sits at (i,j,k)*dx, i,j,k in [0,n).
struct Grid {
  int n = 0;
  Real dx = 0;
  std::vector<Real> mass;
  std::vector<Vec3> momentum;  // holds velocity after the grid update
  std::vector<Vec3> force;     // external nodal forces scattered during P2G

  Grid() = default;
  Grid(int resolution, Real domain_side);

  std::size_t node_count() const noexcept { return mass.size(); }
  std::size_t index(int i, int j, int k) const noexcept {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(n) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(n) * k);
  }
  Vec3 node_position(int i, int j, int k) const { return Vec3(i, j, k) * dx; }
  Real domain_side() const noexcept { return dx * n; }

  void clear();
};

}  // namespace putty
