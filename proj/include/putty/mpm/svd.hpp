#pragma once

#include <Eigen/SVD>

#include "putty/core/types.hpp"

namespace putty {

/// F = U diag(sigma) V^T with U, V proper rotations. For det(F) < 0 the
/// smallest singular value carries the sign.
template <typename Scalar>
struct PolarSvd {
  Matrix3<Scalar> U;
  Vector3<Scalar> sigma;
  Matrix3<Scalar> V;
};

template <typename Scalar>
PolarSvd<Scalar> polar_svd(const Matrix3<Scalar>& F) {
  Eigen::JacobiSVD<Matrix3<Scalar>> svd(F, Eigen::ComputeFullU | Eigen::ComputeFullV);
  PolarSvd<Scalar> out{svd.matrixU(), svd.singularValues(), svd.matrixV()};
  if (out.U.determinant() < 0) {
    out.U.col(2) *= -1;
    out.sigma(2) *= -1;
  }
  if (out.V.determinant() < 0) {
    out.V.col(2) *= -1;
    out.sigma(2) *= -1;
  }
  return out;
}

}  // namespace putty
