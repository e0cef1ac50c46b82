#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>

namespace splinecal {

inline constexpr double kSmallAngle = 1e-8;

/// Skew-symmetric matrix such that skew(v) * u = v x u.
inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  // clang-format off
  s <<    0.0, -v.z(),  v.y(),
        v.z(),    0.0, -v.x(),
       -v.y(),  v.x(),    0.0;
  // clang-format on
  return s;
}

/// Inverse of skew: extracts the vector from an antisymmetric matrix.
inline Eigen::Vector3d vee(const Eigen::Matrix3d& m) {
  return {m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1)};
}

/// Checks orthonormality and det(R) = +1 within tol (elementwise).
inline bool is_rotation(const Eigen::Matrix3d& r, double tol = 1e-9) {
  const Eigen::Matrix3d err = r.transpose() * r - Eigen::Matrix3d::Identity();
  return err.cwiseAbs().maxCoeff() <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

/// SO(3) exponential map (Rodrigues formula). Below kSmallAngle the
/// coefficients switch to their second-order Taylor expansions.
inline Eigen::Matrix3d so3_exp(const Eigen::Vector3d& phi) {
  const double theta_sq = phi.squaredNorm();
  const double theta = std::sqrt(theta_sq);
  double a, b;  // R = I + a*skew(phi) + b*skew(phi)^2
  if (theta < kSmallAngle) {
    a = 1.0 - theta_sq / 6.0;
    b = 0.5 - theta_sq / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta_sq;
  }
  const Eigen::Matrix3d s = skew(phi);
  return Eigen::Matrix3d::Identity() + a * s + b * s * s;
}

/// SO(3) logarithm, principal branch (|result| <= pi). Rejects matrices that
/// violate orthonormality beyond 1e-6. The angle-pi branch extracts the axis
/// from the symmetric part of R with the sign convention that the
/// largest-magnitude component is nonnegative.
inline Eigen::Vector3d so3_log(const Eigen::Matrix3d& r) {
  if (!is_rotation(r, 1e-6)) {
    throw std::invalid_argument("so3_log: input is not a rotation matrix");
  }
  const Eigen::Vector3d half_vee = 0.5 * vee(r);  // sin(theta) * axis
  const double s = half_vee.norm();
  const double c = 0.5 * (r.trace() - 1.0);
  const double theta = std::atan2(s, std::min(1.0, std::max(-1.0, c)));

  if (theta < kSmallAngle) {
    return half_vee * (1.0 + theta * theta / 6.0);
  }
  if (theta > M_PI - 1e-3) {
    // Near pi the antisymmetric part degenerates; use aa^T = (S - c I)/(1 - c).
    const Eigen::Matrix3d outer =
        (0.5 * (r + r.transpose()) - c * Eigen::Matrix3d::Identity()) / (1.0 - c);
    int k = 0;
    outer.diagonal().maxCoeff(&k);
    Eigen::Vector3d axis;
    axis[k] = std::sqrt(std::max(0.0, outer(k, k)));
    for (int i = 0; i < 3; ++i) {
      if (i != k) axis[i] = outer(k, i) / axis[k];
    }
    axis.normalize();
    // Keep consistency with the antisymmetric part when it is still usable,
    // otherwise fall back to the sign tie-break on the double cover.
    if (s > 1e-9) {
      if (axis.dot(half_vee) < 0.0) axis = -axis;
    } else {
      int imax = 0;
      axis.cwiseAbs().maxCoeff(&imax);
      if (axis[imax] < 0.0) axis = -axis;
    }
    return theta * axis;
  }
  return (theta / s) * half_vee;
}

/// Right Jacobian of SO(3): Exp(phi + d) ~= Exp(phi) Exp(Jr(phi) d).
inline Eigen::Matrix3d so3_right_jacobian(const Eigen::Vector3d& phi) {
  const double theta_sq = phi.squaredNorm();
  const double theta = std::sqrt(theta_sq);
  double a, b;  // Jr = I - a*skew(phi) + b*skew(phi)^2
  if (theta < kSmallAngle) {
    a = 0.5 - theta_sq / 24.0;
    b = 1.0 / 6.0 - theta_sq / 120.0;
  } else {
    a = (1.0 - std::cos(theta)) / theta_sq;
    b = (theta - std::sin(theta)) / (theta_sq * theta);
  }
  const Eigen::Matrix3d s = skew(phi);
  return Eigen::Matrix3d::Identity() - a * s + b * s * s;
}

/// Inverse of the right Jacobian.
inline Eigen::Matrix3d so3_right_jacobian_inv(const Eigen::Vector3d& phi) {
  const double theta_sq = phi.squaredNorm();
  const double theta = std::sqrt(theta_sq);
  double b;  // Jr^-1 = I + skew(phi)/2 + b*skew(phi)^2
  if (theta < kSmallAngle) {
    b = 1.0 / 12.0 + theta_sq / 720.0;
  } else {
    b = 1.0 / theta_sq -
        (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  }
  const Eigen::Matrix3d s = skew(phi);
  return Eigen::Matrix3d::Identity() + 0.5 * s + b * s * s;
}

inline Eigen::Matrix3d so3_left_jacobian(const Eigen::Vector3d& phi) {
  return so3_right_jacobian(-phi);
}

inline Eigen::Matrix3d so3_left_jacobian_inv(const Eigen::Vector3d& phi) {
  return so3_right_jacobian_inv(-phi);
}

/// R = Rz(yaw) * Ry(pitch) * Rx(roll), angles in radians.
inline Eigen::Matrix3d rotation_from_euler_zyx(double roll, double pitch, double yaw) {
  const double cr = std::cos(roll), sr = std::sin(roll);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  Eigen::Matrix3d r;
  // clang-format off
  r << cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
       sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
           -sp,                cp * sr,                cp * cr;
  // clang-format on
  return r;
}

/// Returns (roll, pitch, yaw) in radians for the ZYX convention above.
inline Eigen::Vector3d euler_zyx_from_rotation(const Eigen::Matrix3d& r) {
  const double sp = -r(2, 0);
  const double pitch = std::asin(std::min(1.0, std::max(-1.0, sp)));
  if (std::abs(sp) > 1.0 - 1e-9) {
    // Gimbal lock: fold yaw into roll.
    return {std::atan2(-r(0, 1), r(1, 1)) * (sp > 0 ? 1.0 : -1.0), pitch, 0.0};
  }
  return {std::atan2(r(2, 1), r(2, 2)), pitch, std::atan2(r(1, 0), r(0, 0))};
}

}  // namespace splinecal
