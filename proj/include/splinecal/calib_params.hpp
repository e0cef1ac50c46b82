#pragma once

#include <cmath>

#include <Eigen/Core>

#include "splinecal/lie.hpp"
#include "splinecal/sensor_models.hpp"

namespace splinecal {

/// Full set of calibration unknowns. The time offset maps clocks as
/// tau_imu = tau_camera + time_offset; gravity is a two-DoF quantity with a
/// fixed Euclidean norm.
struct CalibParams {
  Eigen::Matrix3d extrinsic_rotation = Eigen::Matrix3d::Identity();  // R_c^b
  Eigen::Vector3d extrinsic_translation = Eigen::Vector3d::Zero();   // t_c^b
  double time_offset = 0.0;                                          // seconds
  ImuIntrinsics imu_intrinsics;
  Eigen::Vector3d gravity_w = Eigen::Vector3d(0.0, 0.0, -9.80665);
};

/// Orthonormal basis of the plane orthogonal to g (3x2), deterministic in g.
inline Eigen::Matrix<double, 3, 2> gravity_tangent_basis(const Eigen::Vector3d& g) {
  const Eigen::Vector3d gn = g.normalized();
  int k = 0;
  gn.cwiseAbs().minCoeff(&k);
  const Eigen::Vector3d e = Eigen::Vector3d::Unit(k);
  Eigen::Matrix<double, 3, 2> b;
  b.col(0) = e.cross(gn).normalized();
  b.col(1) = gn.cross(b.col(0));
  return b;
}

/// Sphere retraction: rotates g by Exp(B(g) xi), preserving |g| exactly.
inline Eigen::Vector3d retract_gravity(const Eigen::Vector3d& g,
                                       const Eigen::Vector2d& xi) {
  return so3_exp(gravity_tangent_basis(g) * xi) * g;
}

}  // namespace splinecal
