#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "putty/core/types.hpp"

namespace putty {

/// Sphere on a medial mesh, with the velocity of its center.
template <typename Scalar>
struct MedialSphere {
  Vector3<Scalar> center = Vector3<Scalar>::Zero();
  Scalar radius = 1;
  Vector3<Scalar> velocity = Vector3<Scalar>::Zero();
};

template <typename Scalar>
struct SphereShape {
  MedialSphere<Scalar> s;
};
/// Linear interpolation of two spheres.
template <typename Scalar>
struct ConeShape {
  std::array<MedialSphere<Scalar>, 2> s;
};
/// Barycentric interpolation of three spheres.
template <typename Scalar>
struct SlabShape {
  std::array<MedialSphere<Scalar>, 3> s;
};

template <typename Scalar>
using BasicMedialPrimitive = std::variant<SphereShape<Scalar>, ConeShape<Scalar>, SlabShape<Scalar>>;
using MedialPrimitive = BasicMedialPrimitive<Real>;

template <typename Scalar>
struct BasicSdfQuery {
  Scalar distance = std::numeric_limits<Scalar>::infinity();  // negative inside
  Vector3<Scalar> normal = Vector3<Scalar>::UnitX();         // outward, unit length
  Vector3<Scalar> closest = Vector3<Scalar>::Zero();
  Vector3<Scalar> boundary_velocity = Vector3<Scalar>::Zero();
  int primitive = -1;

  bool hit() const { return std::isfinite(distance); }
};
using SdfQueryResult = BasicSdfQuery<Real>;

namespace detail {

template <typename Scalar>
Vector3<Scalar> any_perpendicular(const Vector3<Scalar>& axis) {
  const Vector3<Scalar> trial =
      std::abs(axis(0)) < Scalar(0.9) ? Vector3<Scalar>::UnitX() : Vector3<Scalar>::UnitY();
  Vector3<Scalar> perp = trial - axis * axis.dot(trial);
  const Scalar n = perp.norm();
  return n > 0 ? Vector3<Scalar>(perp / n) : Vector3<Scalar>(Vector3<Scalar>::UnitZ());
}

/// Builds the query result from the minimizing interpolated sphere.
template <typename Scalar>
BasicSdfQuery<Scalar> from_center(const Vector3<Scalar>& p, const Vector3<Scalar>& c, Scalar r,
                                  const Vector3<Scalar>& vel, const Vector3<Scalar>& fallback_normal) {
  BasicSdfQuery<Scalar> q;
  const Vector3<Scalar> d = p - c;
  const Scalar len = d.norm();
  q.normal = len > Scalar(1e-300) ? Vector3<Scalar>(d / len) : fallback_normal;
  q.distance = len - r;
  q.closest = c + r * q.normal;
  q.boundary_velocity = vel;
  return q;
}

/// Minimizer t in [0,1] of |p - lerp(c1,c2,t)| - lerp(r1,r2,t). The objective
/// is convex in t, so the stationary point clamped to the interval is exact.
template <typename Scalar>
Scalar cone_parameter(const Vector3<Scalar>& p, const MedialSphere<Scalar>& a, const MedialSphere<Scalar>& b) {
  const Vector3<Scalar> e = b.center - a.center;
  const Scalar L2 = e.squaredNorm();
  const Scalar dr = b.radius - a.radius;
  if (L2 <= dr * dr) return dr > 0 ? Scalar(1) : Scalar(0);  // one sphere contains the other
  const Vector3<Scalar> q = p - a.center;
  const Scalar axial = q.dot(e) / L2;
  const Scalar h = (q - axial * e).norm();
  const Scalar L = std::sqrt(L2);
  const Scalar t = axial + dr * h / (L * std::sqrt(L2 - dr * dr));
  return std::clamp(t, Scalar(0), Scalar(1));
}

}  // namespace detail

template <typename Scalar>
BasicSdfQuery<Scalar> primitive_sdf(const Vector3<Scalar>& p, const SphereShape<Scalar>& sph) {
  return detail::from_center(p, sph.s.center, sph.s.radius, sph.s.velocity, Vector3<Scalar>(Vector3<Scalar>::UnitX()));
}

template <typename Scalar>
BasicSdfQuery<Scalar> primitive_sdf(const Vector3<Scalar>& p, const ConeShape<Scalar>& cone) {
  const auto& [a, b] = cone.s;
  const Scalar t = detail::cone_parameter(p, a, b);
  const Vector3<Scalar> c = a.center + t * (b.center - a.center);
  const Scalar r = a.radius + t * (b.radius - a.radius);
  const Vector3<Scalar> vel = a.velocity + t * (b.velocity - a.velocity);
  const Vector3<Scalar> axis = (b.center - a.center).normalized();
  return detail::from_center(p, c, r, vel, detail::any_perpendicular(axis));
}

/// Slab distance: closed-form interior stationary point, falling back to the
/// three edge cones when it leaves the triangle or does not exist.
template <typename Scalar>
BasicSdfQuery<Scalar> primitive_sdf(const Vector3<Scalar>& p, const SlabShape<Scalar>& slab) {
  const auto& s = slab.s;
  const Vector3<Scalar> e1 = s[0].center - s[2].center;
  const Vector3<Scalar> e2 = s[1].center - s[2].center;
  Eigen::Matrix<Scalar, 3, 2> J;
  J << e1, e2;
  const Eigen::Matrix<Scalar, 2, 2> G = J.transpose() * J;
  const Eigen::Matrix<Scalar, 2, 1> rho(s[0].radius - s[2].radius, s[1].radius - s[2].radius);
  Vector3<Scalar> normal = e1.cross(e2);
  const Scalar nlen = normal.norm();

  const Scalar detG = G.determinant();
  if (nlen > 0 && detG > Scalar(1e-24) * G.trace() * G.trace()) {
    normal /= nlen;
    const Eigen::Matrix<Scalar, 2, 2> Ginv = G.inverse();
    const Scalar k = rho.dot(Ginv * rho);
    if (k < 1) {
      const Scalar h = normal.dot(p - s[2].center);  // signed height above the plane
      const Scalar dist = std::abs(h) / std::sqrt(1 - k);
      // center c* satisfies c* - p = J w - h n with w = dist G^-1 rho
      const Eigen::Matrix<Scalar, 2, 1> w = dist * (Ginv * rho);
      const Vector3<Scalar> cstar = p - h * normal + J * w;
      const Eigen::Matrix<Scalar, 2, 1> uv = Ginv * (J.transpose() * (cstar - s[2].center));
      const Scalar eps = Scalar(1e-12);
      if (uv(0) >= -eps && uv(1) >= -eps && uv(0) + uv(1) <= 1 + eps) {
        const Scalar u = uv(0), v = uv(1), t = 1 - u - v;
        const Scalar r = t * s[2].radius + u * s[0].radius + v * s[1].radius;
        const Vector3<Scalar> vel = t * s[2].velocity + u * s[0].velocity + v * s[1].velocity;
        const Vector3<Scalar> fallback = h >= 0 ? normal : Vector3<Scalar>(-normal);
        return detail::from_center(p, cstar, r, vel, fallback);
      }
    }
  }
  BasicSdfQuery<Scalar> best;
  for (int i = 0; i < 3; ++i) {
    const auto q = primitive_sdf(p, ConeShape<Scalar>{{s[i], s[(i + 1) % 3]}});
    if (q.distance < best.distance) best = q;
  }
  return best;
}

template <typename Scalar>
BasicSdfQuery<Scalar> primitive_sdf(const Vector3<Scalar>& p, const BasicMedialPrimitive<Scalar>& prim) {
  return std::visit([&](const auto& shape) { return primitive_sdf(p, shape); }, prim);
}

/// Axis-aligned bounds (min, max) of the swept spheres.
template <typename Scalar>
std::pair<Vector3<Scalar>, Vector3<Scalar>> primitive_bounds(const BasicMedialPrimitive<Scalar>& prim) {
  Vector3<Scalar> lo = Vector3<Scalar>::Constant(std::numeric_limits<Scalar>::infinity());
  Vector3<Scalar> hi = -lo;
  auto grow = [&](const MedialSphere<Scalar>& s) {
    lo = lo.cwiseMin(s.center - Vector3<Scalar>::Constant(s.radius));
    hi = hi.cwiseMax(s.center + Vector3<Scalar>::Constant(s.radius));
  };
  std::visit(
      [&](const auto& shape) {
        if constexpr (std::is_same_v<std::decay_t<decltype(shape)>, SphereShape<Scalar>>) grow(shape.s);
        else
          for (const auto& s : shape.s) grow(s);
      },
      prim);
  return {lo, hi};
}

/// Control spheres of a primitive, in order.
template <typename Scalar>
std::vector<MedialSphere<Scalar>> control_spheres(const BasicMedialPrimitive<Scalar>& prim) {
  return std::visit(
      [](const auto& shape) -> std::vector<MedialSphere<Scalar>> {
        if constexpr (std::is_same_v<std::decay_t<decltype(shape)>, SphereShape<Scalar>>) return {shape.s};
        else return {shape.s.begin(), shape.s.end()};
      },
      prim);
}

}  // namespace putty
