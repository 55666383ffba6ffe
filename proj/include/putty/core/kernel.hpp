#pragma once

#include <array>
#include <cmath>

#include "putty/core/types.hpp"

namespace putty {

/// Quadratic B-spline transfer stencil for one point: three nodes per axis
/// starting at `base`, with per-axis weights.
template <typename Scalar>
struct QuadraticStencil {
  Vec3i base;
  std::array<Vector3<Scalar>, 3> w;  // w[a](axis) is the weight of node base+a along axis
  Vector3<Scalar> fx;                // position relative to base, in cells

  Scalar weight(int a, int b, int c) const { return w[a](0) * w[b](1) * w[c](2); }
  /// x_i - x_p for the node at offset (a,b,c), in world units.
  Vector3<Scalar> offset(int a, int b, int c, Scalar dx) const {
    return (Vector3<Scalar>(Scalar(a), Scalar(b), Scalar(c)) - fx) * dx;
  }
};

template <typename Scalar>
QuadraticStencil<Scalar> quadratic_stencil(const Vector3<Scalar>& x, Scalar inv_dx) {
  QuadraticStencil<Scalar> s;
  const Vector3<Scalar> g = x * inv_dx;
  for (int d = 0; d < 3; ++d) {
    s.base(d) = static_cast<int>(std::floor(g(d) - Scalar(0.5)));
    s.fx(d) = g(d) - Scalar(s.base(d));
    const Scalar f = s.fx(d);
    s.w[0](d) = Scalar(0.5) * (Scalar(1.5) - f) * (Scalar(1.5) - f);
    s.w[1](d) = Scalar(0.75) - (f - Scalar(1)) * (f - Scalar(1));
    s.w[2](d) = Scalar(0.5) * (f - Scalar(0.5)) * (f - Scalar(0.5));
  }
  return s;
}

/// 1-D quadratic B-spline N(r), r in cell units, support |r| < 1.5.
template <typename Scalar>
Scalar quadratic_bspline(Scalar r) {
  r = std::abs(r);
  if (r < Scalar(0.5)) return Scalar(0.75) - r * r;
  if (r < Scalar(1.5)) return Scalar(0.5) * (Scalar(1.5) - r) * (Scalar(1.5) - r);
  return Scalar(0);
}

}  // namespace putty
