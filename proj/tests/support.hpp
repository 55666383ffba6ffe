#pragma once

#include <random>

#include <Eigen/Dense>

#include "putty/core/types.hpp"

namespace putty::test {

inline std::mt19937_64& rng() {
  static std::mt19937_64 gen(20240917);
  return gen;
}

inline Real uniform(Real lo = 0, Real hi = 1) { return std::uniform_real_distribution<Real>(lo, hi)(rng()); }

inline Vec3 uniform_vec(Real lo = 0, Real hi = 1) { return Vec3(uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)); }

inline Mat3 uniform_mat(Real lo, Real hi) {
  Mat3 m;
  for (int i = 0; i < 9; ++i) m.data()[i] = uniform(lo, hi);
  return m;
}

/// Random deformation gradient: identity plus a perturbation, with det above `min_det`.
inline Mat3 random_deformation(Real amplitude, Real min_det) {
  for (;;) {
    const Mat3 F = Mat3::Identity() + uniform_mat(-amplitude, amplitude);
    if (F.determinant() > min_det) return F;
  }
}

}  // namespace putty::test
