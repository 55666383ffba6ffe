#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "putty/core/types.hpp"
#include "putty/mpm/svd.hpp"

namespace putty {

/// Hencky strain split used by the return mappings.
template <typename Scalar>
struct HenckyStrain {
  Vector3<Scalar> eps;      // log of singular values
  Vector3<Scalar> dev;      // eps - tr(eps)/3
  Scalar trace;
  Scalar dev_norm;
};

template <typename Scalar>
HenckyStrain<Scalar> hencky_strain(const Vector3<Scalar>& sigma) {
  HenckyStrain<Scalar> h;
  h.eps = sigma.array().log().matrix();
  h.trace = h.eps.sum();
  h.dev = h.eps - Vector3<Scalar>::Constant(h.trace / 3);
  h.dev_norm = h.dev.norm();
  return h;
}

template <typename Scalar>
Matrix3<Scalar> compose(const PolarSvd<Scalar>& svd, const Vector3<Scalar>& sigma) {
  return svd.U * sigma.asDiagonal() * svd.V.transpose();
}

template <typename Scalar>
Matrix3<Scalar> return_map(const Matrix3<Scalar>& F, const NoPlasticity&, Scalar, Scalar) {
  return F;
}

/// Sand-like cone yield surface. Expansion (tr eps > 0) projects to the cone
/// tip, F = U V^T.
template <typename Scalar>
Matrix3<Scalar> return_map(const Matrix3<Scalar>& F, const DruckerPrager& p, Scalar mu, Scalar lambda) {
  const auto svd = polar_svd(F);
  const auto h = hencky_strain(svd.sigma);
  if (h.trace > 0) return svd.U * svd.V.transpose();
  const Scalar d = 3;
  const Scalar dgamma = h.dev_norm + Scalar(p.alpha) * (d * lambda + 2 * mu) / (2 * mu) * h.trace;
  if (dgamma <= 0 || h.dev_norm == 0) return F;
  const Vector3<Scalar> eps = h.eps - dgamma / h.dev_norm * h.dev;
  return compose(svd, Vector3<Scalar>(eps.array().exp()));
}

/// Projects the deviatoric Hencky strain onto the ball of radius tau_Y / 2mu.
template <typename Scalar>
Matrix3<Scalar> return_map(const Matrix3<Scalar>& F, const VonMises& p, Scalar mu, Scalar) {
  // Elastic pre-test from the closed-form eigenvalues of F^T F. The margin
  // sends anything near the yield surface down the exact SVD path.
  Eigen::SelfAdjointEigenSolver<Matrix3<Scalar>> eig;
  eig.computeDirect(F.transpose() * F, Eigen::EigenvaluesOnly);
  const Vector3<Scalar> e = Scalar(0.5) * eig.eigenvalues().array().log().matrix();
  const Scalar radius = Scalar(p.tau_y) / (2 * mu);
  if ((e - Vector3<Scalar>::Constant(e.sum() / 3)).norm() < radius * Scalar(1 - 1e-6)) return F;

  const auto svd = polar_svd(F);
  const auto h = hencky_strain(svd.sigma);
  const Scalar dgamma = h.dev_norm - Scalar(p.tau_y) / (2 * mu);
  if (dgamma <= 0) return F;
  const Vector3<Scalar> eps = h.eps - dgamma / h.dev_norm * h.dev;
  return compose(svd, Vector3<Scalar>(eps.array().exp()));
}

template <typename Scalar>
Matrix3<Scalar> return_map(const Matrix3<Scalar>& F, const ClampPlasticity& p, Scalar, Scalar) {
  auto svd = polar_svd(F);
  const Vector3<Scalar> clamped =
      svd.sigma.cwiseMax(Scalar(p.sigma_min)).cwiseMin(Scalar(p.sigma_max));
  if (clamped == svd.sigma) return F;
  return compose(svd, clamped);
}

template <typename Scalar>
Matrix3<Scalar> apply_plasticity(const Matrix3<Scalar>& F, const PlasticityModel& model, Scalar mu, Scalar lambda) {
  if (!F.allFinite()) throw Error("plasticity: non-finite deformation gradient");
  return std::visit([&](const auto& p) { return return_map(F, p, mu, lambda); }, model);
}

template <typename Scalar>
Matrix3<Scalar> apply_plasticity(const Matrix3<Scalar>& F, const MaterialParams& m) {
  return apply_plasticity(F, m.plasticity, Scalar(m.mu), Scalar(m.lambda));
}

}  // namespace putty
