#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "splinecal/calib_params.hpp"
#include "splinecal/data_io.hpp"
#include "splinecal/errors.hpp"
#include "splinecal/lie.hpp"
#include "splinecal/sensor_models.hpp"
#include "splinecal/spline.hpp"
#include "splinecal/vision.hpp"

namespace splinecal {

/// Everything the batch refinement starts from.
struct InitializerState {
  RotationSpline rotation_spline;  // world frame after alignment
  PositionSpline position_spline;  // world frame
  CalibParams calib;
  std::vector<CameraPose> poses;   // accepted PnP poses, time-sorted
  std::vector<std::pair<double, Eigen::Vector3d>> camera_velocities;  // (tau_c, v_c^w)
  InitializerSummary summary;
};

namespace detail {

/// Verifies that every control point is touched by at least one measurement:
/// control point j is unconstrained iff all four segments j-3 .. j are empty.
inline void check_support(const KnotGrid& grid, const std::vector<double>& times,
                          Stage stage, const char* what) {
  std::vector<int> per_segment(grid.segments(), 0);
  for (double t : times) {
    if (grid.contains(t)) ++per_segment[segment_locate(grid, t).index];
  }
  std::vector<int> empty_cps;
  for (int j = 0; j < grid.count; ++j) {
    bool touched = false;
    for (int s = std::max(0, j - 3); s <= std::min(j, grid.segments() - 1); ++s) {
      if (per_segment[s] > 0) {
        touched = true;
        break;
      }
    }
    if (!touched) empty_cps.push_back(j);
  }
  if (!empty_cps.empty()) {
    std::string windows;
    for (std::size_t i = 0; i < empty_cps.size() && i < 8; ++i) {
      if (i) windows += ", ";
      windows += std::to_string(empty_cps[i]);
    }
    if (empty_cps.size() > 8) windows += ", ...";
    throw CalibError(stage, std::string("observability: no ") + what +
                                " support the knot windows of control points [" +
                                windows + "]");
  }
}

}  // namespace detail

/// Fits the rotation spline to raw gyroscope measurements (gyro intrinsics
/// fixed at identity). The first control point is locked to the identity so
/// the spline lives in the first IMU frame.
inline RotationSpline fit_rotation_spline(const std::vector<ImuMeasurement>& gyro,
                                          const KnotGrid& grid,
                                          double* fit_rmse = nullptr) {
  if (gyro.size() < 2) {
    throw CalibError(Stage::RotationFit, "need at least 2 gyroscope samples");
  }
  std::vector<double> times;
  times.reserve(gyro.size());
  for (const auto& m : gyro) {
    if (grid.contains(m.timestamp)) times.push_back(m.timestamp);
  }
  detail::check_support(grid, times, Stage::RotationFit, "gyroscope measurements");

  // Seed control points by dead-reckoning the gyro, re-expressed so the first
  // control point is exactly the identity.
  RotationSpline spline;
  spline.grid = grid;
  spline.control_points.resize(grid.count, Eigen::Matrix3d::Identity());
  {
    std::vector<Eigen::Matrix3d> at_sample(gyro.size());
    at_sample[0] = Eigen::Matrix3d::Identity();
    for (std::size_t k = 0; k + 1 < gyro.size(); ++k) {
      const double dt = gyro[k + 1].timestamp - gyro[k].timestamp;
      const Eigen::Vector3d w = 0.5 * (gyro[k].gyro + gyro[k + 1].gyro);
      at_sample[k + 1] = at_sample[k] * so3_exp(w * dt);
    }
    const auto dead_reckoned = [&](double t) {
      if (t <= gyro.front().timestamp) return at_sample.front();
      if (t >= gyro.back().timestamp) return at_sample.back();
      const auto it = std::lower_bound(
          gyro.begin(), gyro.end(), t,
          [](const ImuMeasurement& m, double v) { return m.timestamp < v; });
      const std::size_t hi = it - gyro.begin();
      const std::size_t lo = hi - 1;
      const double alpha =
          (t - gyro[lo].timestamp) / (gyro[hi].timestamp - gyro[lo].timestamp);
      const Eigen::Vector3d d =
          so3_log(at_sample[lo].transpose() * at_sample[hi]);
      return Eigen::Matrix3d(at_sample[lo] * so3_exp(alpha * d));
    };
    // The spline value at a knot tracks the path one interval behind the
    // control point, so seeds are sampled at knot_time - spacing.
    const Eigen::Matrix3d gauge =
        dead_reckoned(grid.knot_time(0) - grid.knot_spacing).transpose();
    for (int i = 0; i < grid.count; ++i) {
      spline.control_points[i] =
          gauge * dead_reckoned(grid.knot_time(i) - grid.knot_spacing);
    }
    spline.control_points[0] = Eigen::Matrix3d::Identity();
  }

  // Damped least squares over control points 1..count-1.
  const int n_params = 3 * (grid.count - 1);
  const auto column_of = [](int cp) { return 3 * (cp - 1); };

  const auto eval_cost = [&](const RotationSpline& s) {
    double cost = 0.0;
    for (const auto& m : gyro) {
      if (!s.grid.contains(m.timestamp)) continue;
      cost += (m.gyro - s.angular_velocity(m.timestamp, Frame::Body)).squaredNorm();
    }
    return cost;
  };

  double cost = eval_cost(spline);
  double lambda = 1e-6;
  for (int iteration = 0; iteration < 40; ++iteration) {
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(gyro.size() * 36);
    Eigen::VectorXd gradient = Eigen::VectorXd::Zero(n_params);
    std::size_t row_count = 0;
    for (std::size_t k = 0; k < gyro.size(); ++k) {
      if (!grid.contains(gyro[k].timestamp)) continue;
      const RotationQuery q = spline.query(gyro[k].timestamp, true);
      const Eigen::Vector3d residual = gyro[k].gyro - q.omega_body;
      for (int m = 0; m < 4; ++m) {
        const int cp = q.segment + m;
        if (cp == 0) continue;  // gauge lock
        const Eigen::Matrix3d jac = -q.domega_dcp[m];
        const int col = column_of(cp);
        for (int r = 0; r < 3; ++r) {
          for (int c = 0; c < 3; ++c) {
            triplets.emplace_back(3 * row_count + r, col + c, jac(r, c));
          }
        }
        gradient.segment<3>(col) += jac.transpose() * residual;
      }
      ++row_count;
    }
    if (gradient.lpNorm<Eigen::Infinity>() < 1e-12 * (1.0 + cost)) break;

    Eigen::SparseMatrix<double> jac(3 * row_count, n_params);
    jac.setFromTriplets(triplets.begin(), triplets.end());
    Eigen::SparseMatrix<double> hessian = Eigen::SparseMatrix<double>(jac.transpose()) * jac;

    bool stepped = false;
    for (int tries = 0; tries < 10 && !stepped; ++tries) {
      Eigen::SparseMatrix<double> damped = hessian;
      for (int i = 0; i < n_params; ++i) {
        damped.coeffRef(i, i) = hessian.coeff(i, i) * (1.0 + lambda) + 1e-12;
      }
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(damped);
      if (solver.info() != Eigen::Success) {
        lambda *= 10.0;
        continue;
      }
      const Eigen::VectorXd dx = solver.solve(-gradient);
      RotationSpline trial = spline;
      for (int cp = 1; cp < grid.count; ++cp) {
        trial.control_points[cp] =
            spline.control_points[cp] * so3_exp(dx.segment<3>(column_of(cp)));
      }
      const double trial_cost = eval_cost(trial);
      if (trial_cost < cost) {
        spline = std::move(trial);
        cost = trial_cost;
        lambda = std::max(lambda / 3.0, 1e-12);
        stepped = true;
      } else {
        lambda *= 4.0;
      }
    }
    if (!stepped) break;
  }

  if (fit_rmse != nullptr) {
    std::size_t used = 0;
    for (const auto& m : gyro) {
      if (grid.contains(m.timestamp)) ++used;
    }
    *fit_rmse = used ? std::sqrt(cost / (3.0 * used)) : 0.0;
  }
  return spline;
}

struct CorrelationResult {
  double offset = 0.0;      // s, on the grid of average IMU sample intervals
  double peak_ratio = 0.0;  // best score / median score
  bool distinct = false;
};

/// Cross-correlates angular-speed series of the two sensors over integer
/// shifts of the average IMU sample interval. Returns offset 0 with a warning
/// when the correlation peak is not distinct.
inline CorrelationResult cross_correlate_offset(
    const std::vector<std::pair<double, double>>& imu_speed,
    const std::vector<std::pair<double, double>>& cam_speed, double bound) {
  if (imu_speed.size() < 2 || cam_speed.size() < 2) {
    throw CalibError(Stage::Correlation, "speed series too short");
  }
  const double imu_span = imu_speed.back().first - imu_speed.front().first;
  const double cam_span = cam_speed.back().first - cam_speed.front().first;
  if (imu_span < 2.0 || cam_span < 2.0) {
    throw CalibError(Stage::Correlation, "speed series must span at least 2 s");
  }
  const double avg_dt = imu_span / static_cast<double>(imu_speed.size() - 1);
  const int max_shift = std::max(1, static_cast<int>(std::lround(bound / avg_dt)));

  // Winsorize at a robust ceiling: occasional wild camera poses produce speed
  // spikes an order of magnitude above the physical rates, and a product
  // score would let a handful of spikes drag the peak.
  const auto winsorize = [](std::vector<std::pair<double, double>> series) {
    std::vector<double> values;
    values.reserve(series.size());
    for (const auto& [t, s] : series) values.push_back(s);
    std::nth_element(values.begin(), values.begin() + values.size() / 2, values.end());
    const double median = values[values.size() / 2];
    for (double& v : values) v = std::abs(v - median);
    std::nth_element(values.begin(), values.begin() + values.size() / 2, values.end());
    const double mad = values[values.size() / 2];
    const double cap = median + 5.0 * 1.4826 * mad;
    for (auto& [t, s] : series) s = std::min(s, cap);
    return series;
  };
  const std::vector<std::pair<double, double>> imu_w = winsorize(imu_speed);
  const std::vector<std::pair<double, double>> cam_w = winsorize(cam_speed);

  // Mean-centered scoring: the raw product score carries a large
  // shift-invariant baseline that would wash out the peak-distinctness test.
  double imu_mean = 0.0, cam_mean = 0.0;
  for (const auto& [t, s] : imu_w) imu_mean += s;
  imu_mean /= static_cast<double>(imu_w.size());
  for (const auto& [t, s] : cam_w) cam_mean += s;
  cam_mean /= static_cast<double>(cam_w.size());

  const auto nearest_speed = [&](double t) {
    const auto it = std::lower_bound(
        imu_w.begin(), imu_w.end(), t,
        [](const std::pair<double, double>& s, double v) { return s.first < v; });
    if (it == imu_w.begin()) return it->second;
    if (it == imu_w.end()) return (it - 1)->second;
    return (t - (it - 1)->first < it->first - t) ? (it - 1)->second : it->second;
  };

  std::vector<double> scores;
  scores.reserve(2 * max_shift + 1);
  int best_shift = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int s = -max_shift; s <= max_shift; ++s) {
    double score = 0.0;
    for (const auto& [tc, speed] : cam_w) {
      score += (speed - cam_mean) * (nearest_speed(tc + s * avg_dt) - imu_mean);
    }
    scores.push_back(score);
    if (score > best_score) {
      best_score = score;
      best_shift = s;
    }
  }
  std::vector<double> sorted = scores;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double median = sorted[sorted.size() / 2];

  CorrelationResult result;
  if (best_score <= 0.0) {
    result.peak_ratio = 0.0;
  } else if (median <= 0.0) {
    result.peak_ratio = 1e9;
  } else {
    result.peak_ratio = best_score / median;
  }
  result.distinct = result.peak_ratio >= 1.05;
  if (!result.distinct) {
    std::cerr << "warning: correlation peak not distinct (ratio "
              << result.peak_ratio << "); keeping time offset 0\n";
    result.offset = 0.0;
    return result;
  }
  result.offset = best_shift * avg_dt;
  return result;
}

struct HandEyeResult {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // R_c^b
  double time_offset = 0.0;
};

/// Rotation-only hand-eye alignment over consecutive pose pairs, jointly
/// refining the extrinsic rotation and time offset. `offset_margin` bounds
/// how far the offset may move from its initial value (keeps spline queries
/// inside the fitted domain); `offset_bound` is the global configuration
/// bound.
inline HandEyeResult rotation_hand_eye(const std::vector<CameraPose>& poses,
                                       const RotationSpline& spline,
                                       double initial_offset, double offset_margin,
                                       double offset_bound) {
  struct Pair {
    Eigen::Matrix3d cam_rel;  // R_{c_{k+1}}^{c_k}
    double t0, t1;            // camera-clock timestamps
  };
  std::vector<Pair> pairs;
  std::vector<Eigen::Vector3d> cam_rotvecs;
  for (std::size_t k = 0; k + 1 < poses.size(); ++k) {
    const double q0 = poses[k].timestamp + initial_offset;
    const double q1 = poses[k + 1].timestamp + initial_offset;
    if (q0 - offset_margin < spline.grid.domain_begin() ||
        q1 + offset_margin >= spline.grid.domain_end()) {
      continue;
    }
    Pair p;
    p.cam_rel = poses[k].rotation.transpose() * poses[k + 1].rotation;
    p.t0 = poses[k].timestamp;
    p.t1 = poses[k + 1].timestamp;
    pairs.push_back(p);
    cam_rotvecs.push_back(so3_log(p.cam_rel));
  }
  if (pairs.size() < 10) {
    throw CalibError(Stage::HandEye,
                     "excitation deficiency: only " + std::to_string(pairs.size()) +
                         " usable pose pairs (need 10)");
  }

  // Excitation check on rotation vectors with a meaningful angle.
  constexpr double kAngleFloor = 0.01;  // rad, above PnP pose noise
  std::vector<Eigen::Vector3d> excited;
  for (const auto& v : cam_rotvecs) {
    if (v.norm() >= kAngleFloor) excited.push_back(v);
  }
  if (excited.size() < 10) {
    throw CalibError(Stage::HandEye,
                     "excitation deficiency: almost no rotation between poses (" +
                         std::to_string(excited.size()) + " rotating pairs)");
  }
  Eigen::MatrixXd stack(excited.size(), 3);
  for (std::size_t i = 0; i < excited.size(); ++i) stack.row(i) = excited[i];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(stack);
  const Eigen::VectorXd sv = svd.singularValues();
  if (sv[1] <= 0.1 * sv[0]) {
    throw CalibError(Stage::HandEye,
                     "observability: relative-rotation axes span a single direction");
  }

  // Closed-form seed (Kabsch over rotation-vector pairs), then joint damped
  // least squares on (R_c^b, time offset).
  double offset = initial_offset;
  const auto imu_rel = [&](const Pair& p, double t) {
    return Eigen::Matrix3d(spline.value(p.t0 + t).transpose() * spline.value(p.t1 + t));
  };
  Eigen::Matrix3d w = Eigen::Matrix3d::Zero();
  for (const Pair& p : pairs) {
    const Eigen::Vector3d alpha = so3_log(p.cam_rel);
    const Eigen::Vector3d beta = so3_log(imu_rel(p, offset));
    w += beta * alpha.transpose();
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> wsvd(w, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d r_cb = wsvd.matrixU() * wsvd.matrixV().transpose();
  if (r_cb.determinant() < 0.0) {
    Eigen::Matrix3d u = wsvd.matrixU();
    u.col(2) *= -1.0;
    r_cb = u * wsvd.matrixV().transpose();
  }

  const double offset_lo =
      std::max(initial_offset - offset_margin, -offset_bound);
  const double offset_hi = std::min(initial_offset + offset_margin, offset_bound);

  const auto eval_cost = [&](const Eigen::Matrix3d& r, double t) {
    double cost = 0.0;
    for (const Pair& p : pairs) {
      cost += so3_log(r * p.cam_rel * (imu_rel(p, t) * r).transpose()).squaredNorm();
    }
    return cost;
  };

  double cost = eval_cost(r_cb, offset);
  double lambda = 1e-6;
  for (int iteration = 0; iteration < 60; ++iteration) {
    Eigen::Matrix4d hessian = Eigen::Matrix4d::Zero();
    Eigen::Vector4d gradient = Eigen::Vector4d::Zero();
    for (const Pair& p : pairs) {
      const Eigen::Matrix3d b = imu_rel(p, offset);
      const Eigen::Vector3d residual = so3_log(r_cb * p.cam_rel * (b * r_cb).transpose());
      const Eigen::Matrix3d jr_inv = so3_right_jacobian_inv(residual);
      const Eigen::Vector3d w0 = spline.angular_velocity(p.t0 + offset, Frame::Body);
      const Eigen::Vector3d w1 = spline.angular_velocity(p.t1 + offset, Frame::Body);
      Eigen::Matrix<double, 3, 4> jac;
      jac.leftCols<3>() =
          jr_inv * b * r_cb * (p.cam_rel.transpose() - Eigen::Matrix3d::Identity());
      jac.col(3) = jr_inv * (w0 - b * w1);
      hessian += jac.transpose() * jac;
      gradient += jac.transpose() * residual;
    }
    if (gradient.lpNorm<Eigen::Infinity>() < 1e-14 * (1.0 + cost)) break;
    bool stepped = false;
    for (int tries = 0; tries < 12 && !stepped; ++tries) {
      Eigen::Matrix4d damped = hessian;
      damped.diagonal() += lambda * hessian.diagonal().cwiseMax(1e-12);
      const Eigen::Vector4d dx = damped.ldlt().solve(-gradient);
      const Eigen::Matrix3d r_try = r_cb * so3_exp(dx.head<3>());
      const double t_try = std::min(offset_hi, std::max(offset_lo, offset + dx[3]));
      const double trial_cost = eval_cost(r_try, t_try);
      if (trial_cost < cost) {
        r_cb = r_try;
        offset = t_try;
        cost = trial_cost;
        lambda = std::max(lambda / 3.0, 1e-14);
        stepped = true;
      } else {
        lambda *= 4.0;
      }
    }
    if (!stepped) break;
  }

  if (std::abs(offset) >= offset_bound) {
    std::cerr << "warning: hand-eye time offset clamped to the configured bound ("
              << offset_bound << " s)\n";
  }
  return {r_cb, offset};
}

/// Re-expresses the body rotation spline in the board (world) frame using the
/// first accepted pose: R_{b0}^w = R_{c0}^w (R_b^{b0}(tau_0^c + t_off) R_c^b)^T.
inline RotationSpline align_spline_to_world(const RotationSpline& spline_b0,
                                            const std::vector<CameraPose>& poses,
                                            const Eigen::Matrix3d& r_cb,
                                            double time_offset) {
  const CameraPose* first = nullptr;
  for (const CameraPose& p : poses) {
    if (spline_b0.grid.contains(p.timestamp + time_offset)) {
      first = &p;
      break;
    }
  }
  if (first == nullptr) {
    throw CalibError(Stage::Alignment, "no pose maps into the rotation spline domain");
  }
  const Eigen::Matrix3d r_b0_w =
      first->rotation *
      (spline_b0.value(first->timestamp + time_offset) * r_cb).transpose();
  RotationSpline world = spline_b0;
  for (Eigen::Matrix3d& cp : world.control_points) cp = r_b0_w * cp;
  return world;
}

/// First- and second-order integrals of R(t) a(t) over [tau, tau + delta]
/// (trapezoidal, nodes at the accelerometer sample times).
inline std::pair<Eigen::Vector3d, Eigen::Vector3d> integrate_alpha_beta(
    const RotationSpline& rot_spline_w, const std::vector<ImuMeasurement>& accel,
    double tau, double delta) {
  Eigen::Vector3d alpha = Eigen::Vector3d::Zero();
  Eigen::Vector3d beta = Eigen::Vector3d::Zero();
  if (delta == 0.0) return {alpha, beta};
  if (delta < 0.0) {
    throw CalibError(Stage::TranslationGravity, "negative integration window");
  }
  const double end = tau + delta;
  if (accel.size() < 2 || tau < accel.front().timestamp - 1e-9 ||
      end > accel.back().timestamp + 1e-9) {
    throw CalibError(Stage::TranslationGravity,
                     "accelerometer samples do not cover the integration window");
  }
  const double avg_dt = (accel.back().timestamp - accel.front().timestamp) /
                        static_cast<double>(accel.size() - 1);

  const auto sample_at = [&](double t) {
    auto it = std::lower_bound(
        accel.begin(), accel.end(), t,
        [](const ImuMeasurement& m, double v) { return m.timestamp < v; });
    if (it == accel.begin()) return it->accel;
    if (it == accel.end()) return (it - 1)->accel;
    const auto lo = it - 1;
    const double w = (t - lo->timestamp) / (it->timestamp - lo->timestamp);
    return Eigen::Vector3d(lo->accel + w * (it->accel - lo->accel));
  };

  // Node times: window ends plus all interior sample times.
  std::vector<double> nodes{tau};
  for (auto it = std::lower_bound(accel.begin(), accel.end(), tau,
                                  [](const ImuMeasurement& m, double v) {
                                    return m.timestamp < v;
                                  });
       it != accel.end() && it->timestamp < end; ++it) {
    if (it->timestamp > tau) nodes.push_back(it->timestamp);
  }
  nodes.push_back(end);
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    if (nodes[i + 1] - nodes[i] > 2.0 * avg_dt + 1e-9) {
      throw CalibError(Stage::TranslationGravity,
                       "accelerometer coverage gap inside integration window");
    }
  }

  Eigen::Vector3d prev_f = rot_spline_w.value(nodes[0]) * sample_at(nodes[0]);
  Eigen::Vector3d prev_alpha = Eigen::Vector3d::Zero();
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const double dt = nodes[i] - nodes[i - 1];
    const Eigen::Vector3d f = rot_spline_w.value(nodes[i]) * sample_at(nodes[i]);
    const Eigen::Vector3d next_alpha = alpha + 0.5 * dt * (prev_f + f);
    beta += 0.5 * dt * (prev_alpha + next_alpha);
    alpha = next_alpha;
    prev_alpha = next_alpha;
    prev_f = f;
  }
  return {alpha, beta};
}

struct TranslationGravityResult {
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();  // t_c^b
  Eigen::Vector3d gravity = Eigen::Vector3d::Zero();
  std::vector<std::pair<double, Eigen::Vector3d>> camera_velocities;
  double condition_number = 0.0;
};

/// Linear recovery of extrinsic translation, gravity, and per-pose camera
/// velocities from integrated accelerometer measurements and PnP positions.
inline TranslationGravityResult recover_translation_gravity(
    const std::vector<CameraPose>& poses, const RotationSpline& rot_spline_w,
    const std::vector<ImuMeasurement>& imu, double time_offset,
    double gravity_magnitude, double max_pair_gap = 0.5) {
  struct PairRow {
    std::size_t k;         // pose index of the earlier pose
    double tau0, tau1;     // IMU-clock query times
    Eigen::Vector3d alpha, beta;
  };
  std::vector<PairRow> rows;
  for (std::size_t k = 0; k + 1 < poses.size(); ++k) {
    const double tau0 = poses[k].timestamp + time_offset;
    const double tau1 = poses[k + 1].timestamp + time_offset;
    if (tau1 - tau0 > max_pair_gap) continue;
    if (!rot_spline_w.grid.contains(tau0) || !rot_spline_w.grid.contains(tau1)) continue;
    PairRow row;
    row.k = k;
    row.tau0 = tau0;
    row.tau1 = tau1;
    try {
      std::tie(row.alpha, row.beta) =
          integrate_alpha_beta(rot_spline_w, imu, tau0, tau1 - tau0);
    } catch (const CalibError&) {
      continue;
    }
    rows.push_back(row);
  }
  if (rows.size() < 3) {
    throw CalibError(Stage::TranslationGravity,
                     "excitation deficiency: too few usable pose pairs");
  }

  // Unknowns: per-pose world-frame camera velocities first, then t_c^b and g.
  std::vector<int> velocity_col(poses.size(), -1);
  int n_velocities = 0;
  for (const PairRow& row : rows) {
    for (std::size_t k : {row.k, row.k + 1}) {
      if (velocity_col[k] < 0) velocity_col[k] = 3 * n_velocities++;
    }
  }
  const int vel_dim = 3 * n_velocities;
  const int dim = vel_dim + 6;  // + t_cb(3) + g(3)
  const int col_t = vel_dim;
  const int col_g = vel_dim + 3;

  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd rhs_stacked(6 * rows.size());
  const auto put_block = [&](int row0, int col0, const Eigen::Matrix3d& m) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        if (m(r, c) != 0.0) triplets.emplace_back(row0 + r, col0 + c, m(r, c));
      }
    }
  };

  const Eigen::Matrix3d ident = Eigen::Matrix3d::Identity();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const PairRow& row = rows[i];
    const double dt = row.tau1 - row.tau0;
    const Eigen::Matrix3d r0 = rot_spline_w.value(row.tau0);
    const Eigen::Matrix3d r1 = rot_spline_w.value(row.tau1);
    const Eigen::Matrix3d sw0 = skew(rot_spline_w.angular_velocity(row.tau0, Frame::World));
    const Eigen::Matrix3d sw1 = skew(rot_spline_w.angular_velocity(row.tau1, Frame::World));
    const int rv = static_cast<int>(6 * i);
    const int rp = rv + 3;

    // Velocity equation: v_{k+1} - v_k + (sw0 r0 - sw1 r1) t_cb - dt g = alpha.
    put_block(rv, velocity_col[row.k + 1], ident);
    put_block(rv, velocity_col[row.k], -ident);
    put_block(rv, col_t, sw0 * r0 - sw1 * r1);
    put_block(rv, col_g, -dt * ident);
    rhs_stacked.segment<3>(rv) = row.alpha;

    // Position equation:
    // (r0 - r1 + dt sw0 r0) t_cb - dt v_k - dt^2/2 g = beta - (p_{k+1} - p_k).
    put_block(rp, velocity_col[row.k], -dt * ident);
    put_block(rp, col_t, r0 - r1 + dt * sw0 * r0);
    put_block(rp, col_g, -0.5 * dt * dt * ident);
    rhs_stacked.segment<3>(rp) =
        row.beta - (poses[row.k + 1].position - poses[row.k].position);
  }

  Eigen::SparseMatrix<double> a(6 * rows.size(), dim);
  a.setFromTriplets(triplets.begin(), triplets.end());
  const Eigen::SparseMatrix<double> at = a.transpose();
  Eigen::SparseMatrix<double> normal = at * a;
  const Eigen::VectorXd rhs = at * rhs_stacked;

  // Observability check on the Schur complement of the (t_cb, g) block: the
  // per-pose velocities are always well determined, so the reduced 6x6 system
  // carries the excitation information.
  TranslationGravityResult result;
  {
    const Eigen::SparseMatrix<double> n_vv = normal.topLeftCorner(vel_dim, vel_dim);
    const Eigen::MatrixXd n_vt = Eigen::MatrixXd(normal.topRightCorner(vel_dim, 6));
    const Eigen::MatrixXd n_tt = Eigen::MatrixXd(normal.bottomRightCorner(6, 6));
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> vel_solver(n_vv);
    double condition = std::numeric_limits<double>::infinity();
    if (vel_solver.info() == Eigen::Success) {
      const Eigen::MatrixXd schur = n_tt - n_vt.transpose() * vel_solver.solve(n_vt);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(schur);
      const double lo = es.eigenvalues().minCoeff();
      const double hi = es.eigenvalues().maxCoeff();
      condition = (lo > 0.0) ? hi / lo : std::numeric_limits<double>::infinity();
    }
    if (!(condition <= 1e8)) {
      throw CalibError(Stage::TranslationGravity,
                       "excitation deficiency: translation/gravity unobservable "
                       "(normal-equation condition " +
                           std::to_string(condition) + ")");
    }
    result.condition_number = condition;
  }

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(normal);
  if (solver.info() != Eigen::Success) {
    throw CalibError(Stage::TranslationGravity, "normal equations not factorizable");
  }
  const Eigen::VectorXd x = solver.solve(rhs);
  result.translation = x.segment<3>(col_t);
  result.gravity = x.segment<3>(col_g);
  if (result.gravity.norm() > 1e-12) {
    result.gravity *= gravity_magnitude / result.gravity.norm();
  } else {
    result.gravity = Eigen::Vector3d(0.0, 0.0, -gravity_magnitude);
  }
  for (std::size_t k = 0; k < poses.size(); ++k) {
    if (velocity_col[k] >= 0) {
      result.camera_velocities.emplace_back(poses[k].timestamp,
                                            x.segment<3>(velocity_col[k]));
    }
  }
  return result;
}

/// Linear least-squares fit of the position spline to camera positions
/// transported to the IMU by the recovered extrinsics.
inline PositionSpline init_position_spline(const std::vector<CameraPose>& poses,
                                           const RotationSpline& rot_spline_w,
                                           const CalibParams& calib,
                                           const KnotGrid& grid,
                                           double* fit_rmse = nullptr) {
  std::vector<double> times;
  for (const CameraPose& p : poses) {
    const double tau = p.timestamp + calib.time_offset;
    if (grid.contains(tau) && rot_spline_w.grid.contains(tau)) times.push_back(tau);
  }
  detail::check_support(grid, times, Stage::PositionFit, "camera poses");

  const int dim = 3 * grid.count;
  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
  std::size_t used = 0;
  std::vector<Eigen::Vector3d> anchor(grid.count, Eigen::Vector3d::Zero());
  std::vector<double> anchor_gap(grid.count, std::numeric_limits<double>::infinity());
  for (const CameraPose& p : poses) {
    const double tau = p.timestamp + calib.time_offset;
    if (!grid.contains(tau) || !rot_spline_w.grid.contains(tau)) continue;
    const SegmentRef seg = segment_locate(grid, tau);
    const Eigen::Vector4d w = control_point_weights(seg.u, 0);
    const Eigen::Vector3d target =
        p.position - rot_spline_w.value(tau) * calib.extrinsic_translation;
    for (int m = 0; m < 4; ++m) {
      for (int mm = 0; mm < 4; ++mm) {
        const double h = w[m] * w[mm];
        for (int r = 0; r < 3; ++r) {
          triplets.emplace_back(3 * (seg.index + m) + r, 3 * (seg.index + mm) + r, h);
        }
      }
      rhs.segment<3>(3 * (seg.index + m)) += w[m] * target;
    }
    for (int j = 0; j < grid.count; ++j) {
      const double gap = std::abs(grid.knot_time(j) - tau);
      if (gap < anchor_gap[j]) {
        anchor_gap[j] = gap;
        anchor[j] = target;
      }
    }
    ++used;
  }
  // A feather-weight anchor toward the nearest transported pose keeps control
  // points with vanishing basis support (possible at the domain edges) from
  // making the normal equations singular.
  constexpr double kAnchorWeight = 1e-6;
  for (int j = 0; j < grid.count; ++j) {
    for (int r = 0; r < 3; ++r) {
      triplets.emplace_back(3 * j + r, 3 * j + r, kAnchorWeight);
    }
    rhs.segment<3>(3 * j) += kAnchorWeight * anchor[j];
  }
  Eigen::SparseMatrix<double> normal(dim, dim);
  normal.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(normal);
  if (solver.info() != Eigen::Success) {
    throw CalibError(Stage::PositionFit, "position normal equations not factorizable");
  }
  const Eigen::VectorXd x = solver.solve(rhs);

  PositionSpline spline;
  spline.grid = grid;
  spline.control_points.resize(grid.count);
  for (int i = 0; i < grid.count; ++i) {
    spline.control_points[i] = x.segment<3>(3 * i);
  }
  if (fit_rmse != nullptr) {
    double ss = 0.0;
    for (const CameraPose& p : poses) {
      const double tau = p.timestamp + calib.time_offset;
      if (!grid.contains(tau) || !rot_spline_w.grid.contains(tau)) continue;
      const Eigen::Vector3d r = rot_spline_w.value(tau) * calib.extrinsic_translation +
                                spline.value(tau) - p.position;
      ss += r.squaredNorm();
    }
    *fit_rmse = used ? std::sqrt(ss / (3.0 * used)) : 0.0;
  }
  return spline;
}

/// Runs the full three-stage initialization.
inline InitializerState initialize(const std::vector<GridPattern>& patterns,
                                   const std::vector<ImuMeasurement>& imu,
                                   const CalibConfig& config) {
  config.validate();
  if (patterns.size() < 20) {
    throw CalibError(Stage::DataLoad, "insufficient data: fewer than 20 grid patterns");
  }
  if (imu.size() < 2) {
    throw CalibError(Stage::DataLoad, "insufficient data: fewer than 2 IMU samples");
  }

  InitializerState state;
  state.summary.pattern_count = patterns.size();

  // Stage 0: per-pattern planar PnP. Patterns whose pose cannot be solved
  // (degenerate point sets after incomplete tracking) or whose residual is
  // above the threshold are left out of the pose set; the batch optimizer
  // still consumes their correspondences through the robust loss.
  double rmse_sum = 0.0;
  for (const GridPattern& pattern : patterns) {
    CameraPose pose;
    try {
      pose = solve_planar_pnp(pattern, config.camera);
    } catch (const CalibError&) {
      continue;
    }
    if (pose.reprojection_rmse <= config.pnp_rmse_threshold) {
      state.poses.push_back(pose);
      rmse_sum += pose.reprojection_rmse;
    }
  }
  if (state.poses.size() < 10) {
    throw CalibError(Stage::Pnp, "only " + std::to_string(state.poses.size()) +
                                     " poses below the reprojection threshold");
  }
  state.summary.accepted_pose_count = state.poses.size();
  state.summary.pnp_mean_rmse = rmse_sum / static_cast<double>(state.poses.size());

  // Stage 1: rotation spline from raw gyroscope rates.
  const KnotGrid rot_grid =
      extend_grid_for(imu.front().timestamp, imu.back().timestamp, 0.0,
                      config.rotation_knot_spacing);
  RotationSpline rot_b0 =
      fit_rotation_spline(imu, rot_grid, &state.summary.rotation_fit_rmse);

  // Stage 2a: coarse time offset. Small configured bounds skip the
  // correlation and start the hand-eye refinement from zero.
  const double imu_avg_dt = (imu.back().timestamp - imu.front().timestamp) /
                            static_cast<double>(imu.size() - 1);
  double coarse_offset = 0.0;
  double offset_margin = config.time_offset_bound;
  if (config.time_offset_bound > 0.02) {
    std::vector<std::pair<double, double>> imu_speed;
    imu_speed.reserve(imu.size());
    for (const ImuMeasurement& m : imu) {
      imu_speed.emplace_back(m.timestamp, m.gyro.norm());
    }
    const CorrelationResult corr = cross_correlate_offset(
        imu_speed, camera_angular_speed(state.poses), config.time_offset_bound);
    coarse_offset = corr.offset;
    state.summary.correlation_offset = corr.offset;
    state.summary.correlation_peak_ratio = corr.peak_ratio;
    offset_margin = std::max(0.02, 4.0 * imu_avg_dt);
  }

  // Stage 2b: rotation-only hand-eye alignment.
  const HandEyeResult hand_eye =
      rotation_hand_eye(state.poses, rot_b0, coarse_offset, offset_margin,
                        config.time_offset_bound);
  state.summary.hand_eye_rotation = hand_eye.rotation;
  state.summary.hand_eye_time_offset = hand_eye.time_offset;
  state.calib.extrinsic_rotation = hand_eye.rotation;
  state.calib.time_offset = hand_eye.time_offset;
  state.calib.imu_intrinsics = ImuIntrinsics::identity();

  // Stage 2c: world alignment, then translation + gravity.
  state.rotation_spline = align_spline_to_world(rot_b0, state.poses,
                                                hand_eye.rotation,
                                                hand_eye.time_offset);
  const TranslationGravityResult tg = recover_translation_gravity(
      state.poses, state.rotation_spline, imu, hand_eye.time_offset,
      config.gravity_magnitude);
  state.calib.extrinsic_translation = tg.translation;
  state.calib.gravity_w = tg.gravity;
  state.camera_velocities = tg.camera_velocities;
  state.summary.translation_initial = tg.translation;
  state.summary.gravity_initial = tg.gravity;
  state.summary.translation_condition = tg.condition_number;

  // Stage 3: position spline over the pose-supported time range.
  double q_min = std::numeric_limits<double>::infinity();
  double q_max = -std::numeric_limits<double>::infinity();
  for (const CameraPose& p : state.poses) {
    const double tau = p.timestamp + state.calib.time_offset;
    if (state.rotation_spline.grid.contains(tau)) {
      q_min = std::min(q_min, tau);
      q_max = std::max(q_max, tau);
    }
  }
  if (!(q_max > q_min)) {
    throw CalibError(Stage::PositionFit, "no poses inside the rotation spline domain");
  }
  const KnotGrid pos_grid =
      extend_grid_for(q_min, q_max, 0.0, config.position_knot_spacing);
  state.position_spline =
      init_position_spline(state.poses, state.rotation_spline, state.calib, pos_grid,
                           &state.summary.position_fit_rmse);

  // Pad both splines so every measurement time shifted by any offset within
  // the configured bound stays inside the evaluation domains.
  double lo = imu.front().timestamp;
  double hi = imu.back().timestamp;
  for (const GridPattern& p : patterns) {
    lo = std::min(lo, p.timestamp - config.time_offset_bound);
    hi = std::max(hi, p.timestamp + config.time_offset_bound);
  }
  const double margin = 2.0 * config.rotation_knot_spacing;
  extend_spline_cover(state.rotation_spline, lo - margin, hi + margin);
  extend_spline_cover(state.position_spline, lo - margin, hi + margin);
  return state;
}

}  // namespace splinecal
