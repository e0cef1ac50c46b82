#pragma once

#include <Eigen/Core>

#include "splinecal/errors.hpp"

namespace splinecal {

using Pixel = Eigen::Vector2d;

/// Pinhole projection with radial-tangential distortion. Intrinsics are
/// calibrated upstream and treated as fixed inputs everywhere.
struct CameraIntrinsics {
  double fx = 0.0, fy = 0.0;
  double cx = 0.0, cy = 0.0;
  double k1 = 0.0, k2 = 0.0;
  double p1 = 0.0, p2 = 0.0;
  int width = 0, height = 0;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) {
      throw CalibError(Stage::Config, "camera focal lengths must be positive");
    }
    if (!(cx > 0.0) || cx >= width || !(cy > 0.0) || cy >= height) {
      throw CalibError(Stage::Config, "principal point outside image");
    }
  }
};

/// Radial-tangential distortion of normalized image coordinates.
inline Eigen::Vector2d distort(const Eigen::Vector2d& n,
                               const CameraIntrinsics& intr) {
  const double x = n.x(), y = n.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + intr.k1 * r2 + intr.k2 * r2 * r2;
  return {x * radial + 2.0 * intr.p1 * x * y + intr.p2 * (r2 + 2.0 * x * x),
          y * radial + intr.p1 * (r2 + 2.0 * y * y) + 2.0 * intr.p2 * x * y};
}

/// d distort / d normalized point.
inline Eigen::Matrix2d distort_jacobian(const Eigen::Vector2d& n,
                                        const CameraIntrinsics& intr) {
  const double x = n.x(), y = n.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + intr.k1 * r2 + intr.k2 * r2 * r2;
  const double dradial_dr2 = intr.k1 + 2.0 * intr.k2 * r2;
  Eigen::Matrix2d j;
  j(0, 0) = radial + 2.0 * x * x * dradial_dr2 + 2.0 * intr.p1 * y + 6.0 * intr.p2 * x;
  j(0, 1) = 2.0 * x * y * dradial_dr2 + 2.0 * intr.p1 * x + 2.0 * intr.p2 * y;
  j(1, 0) = 2.0 * x * y * dradial_dr2 + 2.0 * intr.p1 * x + 2.0 * intr.p2 * y;
  j(1, 1) = radial + 2.0 * y * y * dradial_dr2 + 6.0 * intr.p1 * y + 2.0 * intr.p2 * x;
  return j;
}

/// Projects a camera-frame point to a (sub-pixel) image point.
/// Throws CheiralityError for non-positive depth.
inline Pixel project(const Eigen::Vector3d& p_c, const CameraIntrinsics& intr) {
  if (!(p_c.z() > 0.0)) throw CheiralityError(p_c.z());
  const Eigen::Vector2d n = p_c.head<2>() / p_c.z();
  const Eigen::Vector2d d = distort(n, intr);
  return {intr.fx * d.x() + intr.cx, intr.fy * d.y() + intr.cy};
}

/// d project / d camera-frame point (2x3).
inline Eigen::Matrix<double, 2, 3> project_jacobian(const Eigen::Vector3d& p_c,
                                                    const CameraIntrinsics& intr) {
  const double inv_z = 1.0 / p_c.z();
  const Eigen::Vector2d n = p_c.head<2>() * inv_z;
  Eigen::Matrix<double, 2, 3> dn_dp;
  dn_dp << inv_z, 0.0, -n.x() * inv_z,
           0.0, inv_z, -n.y() * inv_z;
  Eigen::Matrix2d k;
  k << intr.fx, 0.0, 0.0, intr.fy;
  return k * distort_jacobian(n, intr) * dn_dp;
}

/// IMU intrinsics: upper-triangular mapping matrices (diagonal scale,
/// off-diagonal non-orthogonality) plus constant biases.
struct ImuIntrinsics {
  Eigen::Matrix3d accel_mapping = Eigen::Matrix3d::Identity();  // M_a
  Eigen::Matrix3d gyro_mapping = Eigen::Matrix3d::Identity();   // M_w
  Eigen::Vector3d accel_bias = Eigen::Vector3d::Zero();
  Eigen::Vector3d gyro_bias = Eigen::Vector3d::Zero();

  static ImuIntrinsics identity() { return {}; }

  void validate() const {
    for (const Eigen::Matrix3d* m : {&accel_mapping, &gyro_mapping}) {
      if ((*m)(1, 0) != 0.0 || (*m)(2, 0) != 0.0 || (*m)(2, 1) != 0.0) {
        throw CalibError(Stage::Config, "IMU mapping matrix must be upper triangular");
      }
      if (!((*m)(0, 0) > 0.0) || !((*m)(1, 1) > 0.0) || !((*m)(2, 2) > 0.0)) {
        throw CalibError(Stage::Config, "IMU mapping diagonal must be positive");
      }
    }
  }
};

inline Eigen::Vector3d imu_accel_model(const Eigen::Vector3d& a_ideal,
                                       const ImuIntrinsics& intr) {
  return intr.accel_mapping * a_ideal + intr.accel_bias;
}

inline Eigen::Vector3d imu_gyro_model(const Eigen::Vector3d& w_ideal,
                                      const ImuIntrinsics& intr) {
  return intr.gyro_mapping * w_ideal + intr.gyro_bias;
}

/// Mapping-matrix parameters are ordered (s1, s2, s3, g1, g2, g3) where g1,
/// g2, g3 sit at entries (0,1), (0,2), (1,2). Returns d(M v)/d params.
inline Eigen::Matrix<double, 3, 6> mapping_param_jacobian(const Eigen::Vector3d& v) {
  Eigen::Matrix<double, 3, 6> j = Eigen::Matrix<double, 3, 6>::Zero();
  j(0, 0) = v.x();
  j(1, 1) = v.y();
  j(2, 2) = v.z();
  j(0, 3) = v.y();
  j(0, 4) = v.z();
  j(1, 5) = v.z();
  return j;
}

inline void apply_mapping_params(Eigen::Matrix3d& m,
                                 const Eigen::Matrix<double, 6, 1>& delta) {
  m(0, 0) += delta[0];
  m(1, 1) += delta[1];
  m(2, 2) += delta[2];
  m(0, 1) += delta[3];
  m(0, 2) += delta[4];
  m(1, 2) += delta[5];
}

}  // namespace splinecal
