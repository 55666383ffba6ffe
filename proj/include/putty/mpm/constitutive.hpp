#pragma once

#include <cmath>
#include <string>

#include "putty/core/types.hpp"
#include "putty/mpm/svd.hpp"

namespace putty {

/// First Piola-Kirchhoff stress and the fused P2G force term
/// -(4 dt / dx^2) V0 P F^T.
template <typename Scalar>
struct StressEvaluation {
  Matrix3<Scalar> P;
  Matrix3<Scalar> fused;
};

namespace detail {

template <typename Scalar>
Scalar checked_det(const Matrix3<Scalar>& F) {
  const Scalar J = F.determinant();
  if (!(J > Scalar(0)))
    throw SingularConfigurationError("deformation gradient has det(F) = " + std::to_string(double(J)));
  return J;
}

}  // namespace detail

/// Elastic energy density psi(F).
///   Corotated:  mu |F - R|^2 + lambda/2 (J - 1)^2
///   NeoHookean: mu/2 (tr(F^T F) - 3) - mu log J + lambda/2 log^2 J
template <typename Scalar>
Scalar energy_density(const Matrix3<Scalar>& F, StressModel model, Scalar mu, Scalar lambda) {
  const Scalar J = detail::checked_det(F);
  if (model == StressModel::Corotated) {
    const auto svd = polar_svd(F);
    const Matrix3<Scalar> R = svd.U * svd.V.transpose();
    return mu * (F - R).squaredNorm() + lambda / 2 * (J - 1) * (J - 1);
  }
  const Scalar logJ = std::log(J);
  return mu / 2 * (F.squaredNorm() - 3) - mu * logJ + lambda / 2 * logJ * logJ;
}

/// dpsi/dF.
template <typename Scalar>
Matrix3<Scalar> first_piola(const Matrix3<Scalar>& F, StressModel model, Scalar mu, Scalar lambda) {
  const Scalar J = detail::checked_det(F);
  const Matrix3<Scalar> FinvT = F.inverse().transpose();
  if (model == StressModel::Corotated) {
    const auto svd = polar_svd(F);
    const Matrix3<Scalar> R = svd.U * svd.V.transpose();
    return 2 * mu * (F - R) + lambda * (J - 1) * J * FinvT;
  }
  return mu * (F - FinvT) + lambda * std::log(J) * FinvT;
}

/// Kirchhoff stress tau = P F^T, computed without inverting F.
///   Corotated:  2 mu (F - R) F^T + lambda (J - 1) J I
///   NeoHookean: mu (F F^T - I) + lambda log(J) I
template <typename Scalar>
Matrix3<Scalar> kirchhoff_stress(const Matrix3<Scalar>& F, StressModel model, Scalar mu, Scalar lambda) {
  const Scalar J = detail::checked_det(F);
  const Matrix3<Scalar> I = Matrix3<Scalar>::Identity();
  if (model == StressModel::Corotated) {
    const auto svd = polar_svd(F);
    const Matrix3<Scalar> R = svd.U * svd.V.transpose();
    return 2 * mu * (F - R) * F.transpose() + lambda * (J - 1) * J * I;
  }
  return mu * (F * F.transpose() - I) + lambda * std::log(J) * I;
}

template <typename Scalar>
StressEvaluation<Scalar> evaluate_stress(const Matrix3<Scalar>& F, const MaterialParams& m, Scalar volume0, Scalar dt,
                                         Scalar dx) {
  const Scalar mu = Scalar(m.mu), lambda = Scalar(m.lambda);
  StressEvaluation<Scalar> out;
  out.P = first_piola(F, m.stress_model, mu, lambda);
  out.fused = -(4 * dt / (dx * dx)) * volume0 * kirchhoff_stress(F, m.stress_model, mu, lambda);
  return out;
}

}  // namespace putty
