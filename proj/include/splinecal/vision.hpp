#pragma once

#include <algorithm>
#include <array>
#include <vector>

#include <Eigen/Dense>

#include "splinecal/data_io.hpp"
#include "splinecal/errors.hpp"
#include "splinecal/lie.hpp"
#include "splinecal/sensor_models.hpp"

namespace splinecal {

/// World-frame camera pose recovered from one grid pattern. The world frame
/// is defined by the board (z = 0 plane).
struct CameraPose {
  double timestamp = 0.0;                                  // camera clock
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // R_c^w
  Eigen::Vector3d position = Eigen::Vector3d::Zero();      // t_c^w, meters
  double reprojection_rmse = 0.0;                          // px
};

namespace detail {

/// Iterative inverse of the radial-tangential distortion; used only to seed
/// the homography, the refinement below works on the forward model.
inline Eigen::Vector2d undistort_approx(const Eigen::Vector2d& d,
                                        const CameraIntrinsics& intr) {
  Eigen::Vector2d n = d;
  for (int it = 0; it < 8; ++it) {
    const Eigen::Vector2d delta = distort(n, intr) - n;
    n = d - delta;
  }
  return n;
}

/// DLT homography board(X, Y) -> normalized image coordinates, with
/// isotropic normalization of both point sets.
inline Eigen::Matrix3d dlt_homography(const std::vector<Eigen::Vector2d>& src,
                                      const std::vector<Eigen::Vector2d>& dst) {
  const auto normalizer = [](const std::vector<Eigen::Vector2d>& pts) {
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (const auto& p : pts) mean += p;
    mean /= static_cast<double>(pts.size());
    double scale = 0.0;
    for (const auto& p : pts) scale += (p - mean).norm();
    scale = pts.size() * std::sqrt(2.0) / std::max(scale, 1e-12);
    Eigen::Matrix3d t = Eigen::Matrix3d::Identity();
    t(0, 0) = t(1, 1) = scale;
    t(0, 2) = -scale * mean.x();
    t(1, 2) = -scale * mean.y();
    return t;
  };
  const Eigen::Matrix3d ts = normalizer(src);
  const Eigen::Matrix3d td = normalizer(dst);

  Eigen::MatrixXd a(2 * src.size(), 9);
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Eigen::Vector3d s = ts * src[i].homogeneous();
    const Eigen::Vector3d d = td * dst[i].homogeneous();
    a.row(2 * i) << -s.x(), -s.y(), -1.0, 0.0, 0.0, 0.0,
        d.x() * s.x(), d.x() * s.y(), d.x();
    a.row(2 * i + 1) << 0.0, 0.0, 0.0, -s.x(), -s.y(), -1.0,
        d.y() * s.x(), d.y() * s.y(), d.y();
  }
  // Full V: with a minimal 4-point pattern the system is 8x9 and the
  // homography lives in the last right-singular vector.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd sv = svd.singularValues();
  if (sv[sv.size() - 2] < 1e-9 * sv[0]) {
    throw CalibError(Stage::Pnp, "degenerate correspondence configuration");
  }
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hm;
  hm << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
  return td.inverse() * hm * ts;
}

}  // namespace detail

/// Planar PnP: homography initialization followed by damped least-squares
/// refinement of the reprojection error over the full distortion model.
inline CameraPose solve_planar_pnp(const GridPattern& pattern,
                                   const CameraIntrinsics& intr) {
  const std::size_t n = pattern.points.size();
  if (n < 4) throw CalibError(Stage::Pnp, "pattern below PnP minimum");

  // Collinear boards make the homography rank-deficient.
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& c : pattern.points) mean += c.board_point.head<2>();
  mean /= static_cast<double>(n);
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& c : pattern.points) {
    const Eigen::Vector2d d = c.board_point.head<2>() - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  if (es.eigenvalues()[0] < 1e-12 * std::max(es.eigenvalues()[1], 1e-12)) {
    throw CalibError(Stage::Pnp, "degenerate configuration: board points collinear");
  }

  std::vector<Eigen::Vector2d> board(n), normalized(n);
  for (std::size_t i = 0; i < n; ++i) {
    board[i] = pattern.points[i].board_point.head<2>();
    const Eigen::Vector2d px = pattern.points[i].pixel;
    normalized[i] = detail::undistort_approx(
        {(px.x() - intr.cx) / intr.fx, (px.y() - intr.cy) / intr.fy}, intr);
  }

  Eigen::Matrix3d h = detail::dlt_homography(board, normalized);
  // Fix the sign so the board sits in front of the camera.
  double depth_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    depth_sum += (h * board[i].homogeneous()).z();
  }
  if (depth_sum < 0.0) h = -h;

  // Pose from homography columns, orthonormalized by SVD.
  const double scale = 2.0 / (h.col(0).norm() + h.col(1).norm());
  Eigen::Matrix3d rough;
  rough.col(0) = scale * h.col(0);
  rough.col(1) = scale * h.col(1);
  rough.col(2) = rough.col(0).cross(rough.col(1));
  Eigen::JacobiSVD<Eigen::Matrix3d> rsvd(rough, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d r_wc = rsvd.matrixU() * rsvd.matrixV().transpose();
  if (r_wc.determinant() < 0.0) {
    Eigen::Matrix3d u = rsvd.matrixU();
    u.col(2) *= -1.0;
    r_wc = u * rsvd.matrixV().transpose();
  }
  Eigen::Vector3d t_wc = scale * h.col(2);

  // Damped least-squares refinement on (R, t) world->camera.
  const auto residuals = [&](const Eigen::Matrix3d& r, const Eigen::Vector3d& t,
                             Eigen::VectorXd& res) {
    res.resize(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector3d p_c = r * pattern.points[i].board_point + t;
      if (!(p_c.z() > 0.0)) return false;
      res.segment<2>(2 * i) = pattern.points[i].pixel - project(p_c, intr);
    }
    return true;
  };

  Eigen::VectorXd res;
  if (!residuals(r_wc, t_wc, res)) {
    throw CalibError(Stage::Pnp, "homography pose places board behind camera");
  }
  double cost = res.squaredNorm();
  double lambda = 1e-6;
  for (int it = 0; it < 50; ++it) {
    Eigen::MatrixXd jac(2 * n, 6);  // [d/d theta (right tangent), d/d t]
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector3d p_c = r_wc * pattern.points[i].board_point + t_wc;
      const Eigen::Matrix<double, 2, 3> jp = project_jacobian(p_c, intr);
      jac.block<2, 3>(2 * i, 0) = jp * r_wc * skew(pattern.points[i].board_point);
      jac.block<2, 3>(2 * i, 3) = -jp;
    }
    const Eigen::Matrix<double, 6, 6> hessian = jac.transpose() * jac;
    const Eigen::Matrix<double, 6, 1> grad = jac.transpose() * res;
    if (grad.lpNorm<Eigen::Infinity>() < 1e-14 * (1.0 + cost)) break;
    bool stepped = false;
    for (int tries = 0; tries < 12 && !stepped; ++tries) {
      Eigen::Matrix<double, 6, 6> damped = hessian;
      damped.diagonal() += lambda * hessian.diagonal().cwiseMax(1e-12);
      const Eigen::Matrix<double, 6, 1> dx = damped.ldlt().solve(-grad);
      const Eigen::Matrix3d r_try = r_wc * so3_exp(dx.head<3>());
      const Eigen::Vector3d t_try = t_wc + dx.tail<3>();
      Eigen::VectorXd res_try;
      if (residuals(r_try, t_try, res_try) && res_try.squaredNorm() < cost) {
        r_wc = r_try;
        t_wc = t_try;
        res = res_try;
        cost = res.squaredNorm();
        lambda = std::max(lambda / 3.0, 1e-12);
        stepped = true;
      } else {
        lambda *= 4.0;
      }
    }
    if (!stepped) break;
  }

  CameraPose pose;
  pose.timestamp = pattern.timestamp;
  pose.rotation = r_wc.transpose();        // R_c^w
  pose.position = -r_wc.transpose() * t_wc;
  pose.reprojection_rmse = std::sqrt(cost / static_cast<double>(2 * n));
  return pose;
}

/// Three-point Lagrange polynomial on SO(3):
///   L3(tau) = R0 * Exp(a(tau) Log(R0^T R1)) * Exp(b(tau) Log(R1^T R2)).
inline Eigen::Matrix3d lagrange_so3(
    const std::array<std::pair<double, Eigen::Matrix3d>, 3>& samples, double tau) {
  const double t0 = samples[0].first, t1 = samples[1].first, t2 = samples[2].first;
  if (!(t0 < t1 && t1 < t2)) {
    throw CalibError(Stage::Pnp, "lagrange_so3 requires strictly increasing sample times");
  }
  const double a = (tau - t0) * ((t2 - t0) - (tau - t1)) / ((t0 - t2) * (t0 - t1));
  const double b = (tau - t0) * (tau - t1) / ((t2 - t0) * (t2 - t1));
  const Eigen::Vector3d d1 = so3_log(samples[0].second.transpose() * samples[1].second);
  const Eigen::Vector3d d2 = so3_log(samples[1].second.transpose() * samples[2].second);
  return samples[0].second * so3_exp(a * d1) * so3_exp(b * d2);
}

/// Angular speed |dL3/dtau| at each interior pose time, via central
/// differencing of the Lagrange interpolant.
inline std::vector<std::pair<double, double>> camera_angular_speed(
    const std::vector<CameraPose>& poses) {
  if (poses.size() < 3) {
    throw CalibError(Stage::Correlation, "need at least 3 poses for angular speed");
  }
  std::vector<double> intervals;
  for (std::size_t i = 0; i + 1 < poses.size(); ++i) {
    intervals.push_back(poses[i + 1].timestamp - poses[i].timestamp);
  }
  std::nth_element(intervals.begin(), intervals.begin() + intervals.size() / 2,
                   intervals.end());
  const double h = 1e-4 * intervals[intervals.size() / 2];

  std::vector<std::pair<double, double>> out;
  for (std::size_t k = 1; k + 1 < poses.size(); ++k) {
    const double ta = poses[k - 1].timestamp;
    const double tb = poses[k].timestamp;
    const double tc = poses[k + 1].timestamp;
    if (!(ta < tb && tb < tc)) continue;
    const std::array<std::pair<double, Eigen::Matrix3d>, 3> tri{
        std::pair{ta, poses[k - 1].rotation}, std::pair{tb, poses[k].rotation},
        std::pair{tc, poses[k + 1].rotation}};
    const Eigen::Matrix3d before = lagrange_so3(tri, tb - h);
    const Eigen::Matrix3d after = lagrange_so3(tri, tb + h);
    const double speed = so3_log(before.transpose() * after).norm() / (2.0 * h);
    out.emplace_back(tb, speed);
  }
  return out;
}

}  // namespace splinecal
