#pragma once

#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "splinecal/errors.hpp"
#include "splinecal/lie.hpp"

namespace splinecal {

/// Uniformly spaced knot sequence. Knot i lives at start_time + i * spacing.
/// A cubic segment i blends control points (i .. i+3) and covers the
/// half-open interval [knot_i, knot_{i+1}), so the evaluation domain is
/// [start_time, start_time + (count - 3) * spacing).
struct KnotGrid {
  double start_time = 0.0;
  double knot_spacing = 0.05;
  int count = 0;

  double knot_time(int i) const { return start_time + i * knot_spacing; }
  int segments() const { return count - 3; }
  double domain_begin() const { return start_time; }
  double domain_end() const { return start_time + segments() * knot_spacing; }
  bool contains(double tau) const {
    return tau >= domain_begin() && tau < domain_end();
  }
};

struct SegmentRef {
  int index = 0;  // first control point of the 4-point window
  double u = 0.0; // normalized position in [0, 1)
};

/// Maps tau to its segment and normalized coordinate u = (tau - knot_i)/dt.
inline SegmentRef segment_locate(const KnotGrid& grid, double tau) {
  const double x = (tau - grid.start_time) / grid.knot_spacing;
  if (!(x >= 0.0) || x >= grid.segments()) {
    throw SplineDomainError(tau, grid.domain_begin(), grid.domain_end());
  }
  int i = static_cast<int>(std::floor(x));
  if (i > grid.segments() - 1) i = grid.segments() - 1;
  return {i, x - i};
}

/// Cumulative cubic blending vector (lambda_1, lambda_2, lambda_3) or its
/// d-th derivative with respect to u.
inline Eigen::Vector3d cumulative_basis(double u, int derivative = 0) {
  const double u2 = u * u;
  const double u3 = u2 * u;
  switch (derivative) {
    case 0:
      return {(u3 - 3.0 * u2 + 3.0 * u + 5.0) / 6.0,
              (-2.0 * u3 + 3.0 * u2 + 3.0 * u + 1.0) / 6.0,
              u3 / 6.0};
    case 1:
      return {(3.0 * u2 - 6.0 * u + 3.0) / 6.0,
              (-6.0 * u2 + 6.0 * u + 3.0) / 6.0,
              3.0 * u2 / 6.0};
    case 2:
      return {(6.0 * u - 6.0) / 6.0, (-12.0 * u + 6.0) / 6.0, u};
    default:
      throw std::invalid_argument("cumulative_basis: derivative order must be 0..2");
  }
}

/// Per-control-point scalar weights of the cumulative form, i.e. the value
/// (or u-derivative) expressed as sum_m w_m * p_{i+m}.
inline Eigen::Vector4d control_point_weights(double u, int derivative = 0) {
  const Eigen::Vector3d lam = cumulative_basis(u, derivative);
  if (derivative == 0) {
    return {1.0 - lam[0], lam[0] - lam[1], lam[1] - lam[2], lam[2]};
  }
  return {-lam[0], lam[0] - lam[1], lam[1] - lam[2], lam[2]};
}

struct PositionSpline {
  KnotGrid grid;
  std::vector<Eigen::Vector3d> control_points;

  Eigen::Vector3d value(double tau) const {
    const SegmentRef seg = segment_locate(grid, tau);
    const Eigen::Vector3d lam = cumulative_basis(seg.u, 0);
    Eigen::Vector3d p = control_points[seg.index];
    for (int j = 1; j <= 3; ++j) {
      p += lam[j - 1] *
           (control_points[seg.index + j] - control_points[seg.index + j - 1]);
    }
    return p;
  }

  /// Analytic time derivative of the given order (1 = velocity, 2 = acceleration).
  Eigen::Vector3d derivative(double tau, int order) const {
    if (order < 1 || order > 2) {
      throw std::invalid_argument("PositionSpline::derivative: order must be 1 or 2");
    }
    const SegmentRef seg = segment_locate(grid, tau);
    const Eigen::Vector3d lam = cumulative_basis(seg.u, order);
    const double scale = std::pow(1.0 / grid.knot_spacing, order);
    Eigen::Vector3d d = Eigen::Vector3d::Zero();
    for (int j = 1; j <= 3; ++j) {
      d += lam[j - 1] *
           (control_points[seg.index + j] - control_points[seg.index + j - 1]);
    }
    return scale * d;
  }

  Eigen::Vector3d velocity(double tau) const { return derivative(tau, 1); }
  Eigen::Vector3d acceleration(double tau) const { return derivative(tau, 2); }
};

enum class Frame { World, Body };

/// Evaluation of a rotation spline at one time, optionally with the
/// right-tangent Jacobians of the value and body rate with respect to the
/// four control points of the segment.
struct RotationQuery {
  int segment = 0;
  Eigen::Matrix3d value = Eigen::Matrix3d::Identity();
  Eigen::Vector3d omega_body = Eigen::Vector3d::Zero();  // rad/s
  std::array<Eigen::Matrix3d, 4> dvalue_dcp{};   // d theta / d eps_m
  std::array<Eigen::Matrix3d, 4> domega_dcp{};   // d omega_body / d eps_m
};

struct RotationSpline {
  KnotGrid grid;
  std::vector<Eigen::Matrix3d> control_points;

  Eigen::Matrix3d value(double tau) const { return query(tau, false).value; }

  /// World-frame rate satisfies dR/dt = skew(omega_world) * R; the body frame
  /// applies R^T.
  Eigen::Vector3d angular_velocity(double tau, Frame frame) const {
    const RotationQuery q = query(tau, false);
    if (frame == Frame::Body) return q.omega_body;
    return q.value * q.omega_body;
  }

  RotationQuery query(double tau, bool with_jacobians) const {
    const SegmentRef seg = segment_locate(grid, tau);
    const Eigen::Vector3d lam = cumulative_basis(seg.u, 0);
    const Eigen::Vector3d dlam = cumulative_basis(seg.u, 1);
    const double inv_dt = 1.0 / grid.knot_spacing;

    const Eigen::Matrix3d* cp = &control_points[seg.index];
    std::array<Eigen::Vector3d, 3> d;  // segment increments, d_j = Log(R_{j-1}^T R_j)
    std::array<Eigen::Matrix3d, 3> a;  // A_j = Exp(lam_j d_j)
    for (int j = 0; j < 3; ++j) {
      d[j] = so3_log(cp[j].transpose() * cp[j + 1]);
      a[j] = so3_exp(lam[j] * d[j]);
    }

    RotationQuery out;
    out.segment = seg.index;
    out.value = cp[0] * a[0] * a[1] * a[2];

    // Body rate recursion: w_j = dlam_j d_j + A_j^T w_{j-1}, in u-units.
    const Eigen::Vector3d w1 = dlam[0] * d[0];
    const Eigen::Vector3d w2 = dlam[1] * d[1] + a[1].transpose() * w1;
    const Eigen::Vector3d w3 = dlam[2] * d[2] + a[2].transpose() * w2;
    out.omega_body = inv_dt * w3;

    if (!with_jacobians) return out;

    // Suffix products G_j = (A_{j+1} ... A_3)^T.
    const Eigen::Matrix3d g3 = Eigen::Matrix3d::Identity();
    const Eigen::Matrix3d g2 = a[2].transpose();
    const Eigen::Matrix3d g1 = a[2].transpose() * a[1].transpose();
    const Eigen::Matrix3d g0 = g1 * a[0].transpose();

    // E_j maps increment perturbations into right tangents of A_j.
    std::array<Eigen::Matrix3d, 3> e, p, n;
    for (int j = 0; j < 3; ++j) {
      e[j] = lam[j] * so3_right_jacobian(lam[j] * d[j]);
      p[j] = so3_right_jacobian_inv(d[j]);    // d d_j / d eps_j
      n[j] = -so3_left_jacobian_inv(d[j]);    // d d_j / d eps_{j-1}
    }

    out.dvalue_dcp[0] = g0 + g1 * e[0] * n[0];
    out.dvalue_dcp[1] = g1 * e[0] * p[0] + g2 * e[1] * n[1];
    out.dvalue_dcp[2] = g2 * e[1] * p[1] + g3 * e[2] * n[2];
    out.dvalue_dcp[3] = g3 * e[2] * p[2];

    // d w3 / d d_j, propagated through the recursion.
    const Eigen::Matrix3d dd1 = dlam[0] * g1;
    const Eigen::Matrix3d dd2 =
        g2 * (dlam[1] * Eigen::Matrix3d::Identity() +
              skew(a[1].transpose() * w1) * e[1]);
    const Eigen::Matrix3d dd3 = dlam[2] * Eigen::Matrix3d::Identity() +
                                skew(a[2].transpose() * w2) * e[2];

    out.domega_dcp[0] = inv_dt * (dd1 * n[0]);
    out.domega_dcp[1] = inv_dt * (dd1 * p[0] + dd2 * n[1]);
    out.domega_dcp[2] = inv_dt * (dd2 * p[1] + dd3 * n[2]);
    out.domega_dcp[3] = inv_dt * (dd3 * p[2]);
    return out;
  }
};

/// Builds a knot grid whose evaluation domain covers
/// [min_time - pad, max_time + pad]. The start time is snapped to an integer
/// multiple of the spacing so grids with equal spacing share knot phase.
inline KnotGrid extend_grid_for(double min_time, double max_time, double pad,
                                double spacing) {
  if (!(spacing > 0.0)) {
    throw CalibError(Stage::Config, "knot spacing must be positive");
  }
  if (!(max_time > min_time)) {
    throw CalibError(Stage::Config, "degenerate time range for spline grid");
  }
  if (pad < 0.0) {
    throw CalibError(Stage::Config, "grid padding must be nonnegative");
  }
  KnotGrid grid;
  grid.knot_spacing = spacing;
  grid.start_time = std::floor((min_time - pad) / spacing) * spacing;
  const double hi = max_time + pad;
  int segments = static_cast<int>(std::ceil((hi - grid.start_time) / spacing));
  if (segments < 1) segments = 1;
  // Half-open domain: make sure hi itself stays evaluable.
  while (grid.start_time + segments * spacing <= hi + 1e-12) ++segments;
  grid.count = segments + 3;
  return grid;
}

/// Extends a spline grid (phase-preserving) so its domain covers [lo, hi];
/// new edge control points replicate the boundary values.
template <typename Spline>
inline void extend_spline_cover(Spline& spline, double lo, double hi) {
  const double dt = spline.grid.knot_spacing;
  int prepend = 0;
  while (spline.grid.start_time - prepend * dt > lo) ++prepend;
  int append = 0;
  while (spline.grid.domain_end() + append * dt <= hi + 1e-12) ++append;
  if (prepend > 0) {
    spline.control_points.insert(spline.control_points.begin(), prepend,
                                 spline.control_points.front());
    spline.grid.start_time -= prepend * dt;
    spline.grid.count += prepend;
  }
  if (append > 0) {
    spline.control_points.insert(spline.control_points.end(), append,
                                 spline.control_points.back());
    spline.grid.count += append;
  }
}

inline PositionSpline constant_position_spline(const KnotGrid& grid,
                                               const Eigen::Vector3d& p) {
  return {grid, std::vector<Eigen::Vector3d>(grid.count, p)};
}

inline RotationSpline constant_rotation_spline(const KnotGrid& grid,
                                               const Eigen::Matrix3d& r) {
  return {grid, std::vector<Eigen::Matrix3d>(grid.count, r)};
}

}  // namespace splinecal
