#pragma once

#include <random>

#include <Eigen/Dense>

#include "splinecal/lie.hpp"
#include "splinecal/spline.hpp"

namespace test_helpers {

inline Eigen::Vector3d random_vector(std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  return {dist(rng), dist(rng), dist(rng)};
}

inline Eigen::Vector3d random_unit(std::mt19937_64& rng) {
  Eigen::Vector3d v;
  do {
    v = random_vector(rng);
  } while (v.norm() < 1e-3);
  return v.normalized();
}

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng, double max_angle = 3.0) {
  std::uniform_real_distribution<double> angle(0.0, max_angle);
  return splinecal::so3_exp(angle(rng) * random_unit(rng));
}

/// Random smooth rotation spline: consecutive control points differ by small
/// random increments.
inline splinecal::RotationSpline random_rotation_spline(std::mt19937_64& rng,
                                                        const splinecal::KnotGrid& grid,
                                                        double step = 0.1) {
  splinecal::RotationSpline s;
  s.grid = grid;
  s.control_points.resize(grid.count);
  s.control_points[0] = random_rotation(rng);
  for (int i = 1; i < grid.count; ++i) {
    s.control_points[i] =
        s.control_points[i - 1] * splinecal::so3_exp(random_vector(rng, step));
  }
  return s;
}

inline splinecal::PositionSpline random_position_spline(std::mt19937_64& rng,
                                                        const splinecal::KnotGrid& grid,
                                                        double step = 0.05) {
  splinecal::PositionSpline s;
  s.grid = grid;
  s.control_points.resize(grid.count);
  s.control_points[0] = random_vector(rng, 0.5);
  for (int i = 1; i < grid.count; ++i) {
    s.control_points[i] = s.control_points[i - 1] + random_vector(rng, step);
  }
  return s;
}

inline double matrix_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace test_helpers
