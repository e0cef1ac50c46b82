#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "splinecal/calib_params.hpp"
#include "splinecal/data_io.hpp"
#include "splinecal/errors.hpp"
#include "splinecal/initializer.hpp"
#include "splinecal/lie.hpp"
#include "splinecal/sensor_models.hpp"
#include "splinecal/spline.hpp"

namespace splinecal {

/// The complete optimization state of the batch problem.
struct FullState {
  RotationSpline rotation_spline;  // R_b^w
  PositionSpline position_spline;  // p_b^w
  CalibParams calib;
};

struct SolverOptions {
  int max_iterations = 50;
  double function_tolerance = 1e-12;
  double gradient_tolerance = 1e-10;
  double step_tolerance = 1e-14;  // infinity norm of the update
  double cost_floor = 1e-14;      // whitened cost below this is numerically zero
  double huber_delta = 1.0;   // whitened-residual units, reprojection only
  double sigma_pixel = 0.5;   // px
  double sigma_gyro = 0.005;  // rad/s
  double sigma_accel = 0.02;  // m/s^2
  double time_offset_bound = 0.1;  // s
  bool estimate_imu_mapping = false;
  bool lock_rotation_spline = false;
  bool lock_position_spline = false;
  bool lock_extrinsic_rotation = false;
  bool lock_extrinsic_translation = false;
  bool lock_time_offset = false;
  bool lock_gravity = false;
  bool lock_imu_biases = false;

  static SolverOptions from_config(const CalibConfig& config) {
    SolverOptions o;
    o.max_iterations = config.max_iterations;
    o.function_tolerance = config.function_tolerance;
    o.gradient_tolerance = config.gradient_tolerance;
    o.huber_delta = config.huber_threshold;
    o.sigma_pixel = config.sigma_pixel;
    o.sigma_gyro = config.sigma_gyro;
    o.sigma_accel = config.sigma_accel;
    o.time_offset_bound = config.time_offset_bound;
    o.estimate_imu_mapping = config.estimate_imu_mapping;
    return o;
  }
};

/// Column layout of the active parameter blocks.
struct StateLayout {
  int rot_cp_count = 0;
  int pos_cp_count = 0;
  int rot_base = -1;
  int pos_base = -1;
  int col_extrinsic_rotation = -1;
  int col_extrinsic_translation = -1;
  int col_time_offset = -1;
  int col_gravity = -1;       // 2 columns (tangent of the sphere)
  int col_gyro_bias = -1;
  int col_accel_bias = -1;
  int col_gyro_mapping = -1;  // 6 columns
  int col_accel_mapping = -1; // 6 columns
  int dim = 0;

  static StateLayout build(const FullState& state, const SolverOptions& opts) {
    StateLayout l;
    l.rot_cp_count = static_cast<int>(state.rotation_spline.control_points.size());
    l.pos_cp_count = static_cast<int>(state.position_spline.control_points.size());
    int next = 0;
    if (!opts.lock_rotation_spline) {
      l.rot_base = next;
      next += 3 * l.rot_cp_count;
    }
    if (!opts.lock_position_spline) {
      l.pos_base = next;
      next += 3 * l.pos_cp_count;
    }
    if (!opts.lock_extrinsic_rotation) {
      l.col_extrinsic_rotation = next;
      next += 3;
    }
    if (!opts.lock_extrinsic_translation) {
      l.col_extrinsic_translation = next;
      next += 3;
    }
    if (!opts.lock_time_offset) {
      l.col_time_offset = next;
      next += 1;
    }
    if (!opts.lock_gravity) {
      l.col_gravity = next;
      next += 2;
    }
    if (!opts.lock_imu_biases) {
      l.col_gyro_bias = next;
      next += 3;
      l.col_accel_bias = next;
      next += 3;
    }
    if (opts.estimate_imu_mapping) {
      l.col_gyro_mapping = next;
      next += 6;
      l.col_accel_mapping = next;
      next += 6;
    }
    l.dim = next;
    return l;
  }
};

/// Manifold update: rotations by right multiplication, gravity on its sphere,
/// everything else additive. The time offset is clamped to its bound.
inline FullState retract(const FullState& state, const StateLayout& layout,
                         const Eigen::VectorXd& dx, const SolverOptions& opts) {
  if (dx.size() != layout.dim) {
    throw CalibError(Stage::Optimize, "retract: increment dimension mismatch");
  }
  FullState out = state;
  if (layout.rot_base >= 0) {
    for (int i = 0; i < layout.rot_cp_count; ++i) {
      out.rotation_spline.control_points[i] =
          state.rotation_spline.control_points[i] *
          so3_exp(dx.segment<3>(layout.rot_base + 3 * i));
    }
  }
  if (layout.pos_base >= 0) {
    for (int i = 0; i < layout.pos_cp_count; ++i) {
      out.position_spline.control_points[i] += dx.segment<3>(layout.pos_base + 3 * i);
    }
  }
  if (layout.col_extrinsic_rotation >= 0) {
    out.calib.extrinsic_rotation =
        state.calib.extrinsic_rotation *
        so3_exp(dx.segment<3>(layout.col_extrinsic_rotation));
  }
  if (layout.col_extrinsic_translation >= 0) {
    out.calib.extrinsic_translation += dx.segment<3>(layout.col_extrinsic_translation);
  }
  if (layout.col_time_offset >= 0) {
    const double t = state.calib.time_offset + dx[layout.col_time_offset];
    out.calib.time_offset =
        std::min(opts.time_offset_bound, std::max(-opts.time_offset_bound, t));
  }
  if (layout.col_gravity >= 0) {
    out.calib.gravity_w =
        retract_gravity(state.calib.gravity_w, dx.segment<2>(layout.col_gravity));
  }
  if (layout.col_gyro_bias >= 0) {
    out.calib.imu_intrinsics.gyro_bias += dx.segment<3>(layout.col_gyro_bias);
    out.calib.imu_intrinsics.accel_bias += dx.segment<3>(layout.col_accel_bias);
  }
  if (layout.col_gyro_mapping >= 0) {
    apply_mapping_params(out.calib.imu_intrinsics.gyro_mapping,
                         dx.segment<6>(layout.col_gyro_mapping));
    apply_mapping_params(out.calib.imu_intrinsics.accel_mapping,
                         dx.segment<6>(layout.col_accel_mapping));
  }
  return out;
}

/// Huber loss on a squared norm: rho(s) = s for s <= delta^2, else
/// 2 delta sqrt(s) - delta^2.
inline double huber_cost(double squared_norm, double delta) {
  const double d2 = delta * delta;
  if (squared_norm <= d2) return squared_norm;
  return 2.0 * delta * std::sqrt(squared_norm) - d2;
}

// ---------------------------------------------------------------------------
// Single-factor residuals (unwhitened), usable standalone.
// ---------------------------------------------------------------------------

inline Eigen::Vector2d reprojection_residual(const FullState& state,
                                             const CameraIntrinsics& intr,
                                             double pattern_time,
                                             const GridPattern::Correspondence& corr) {
  const double tau = pattern_time + state.calib.time_offset;
  const Eigen::Matrix3d r = state.rotation_spline.value(tau);
  const Eigen::Vector3d p = state.position_spline.value(tau);
  const Eigen::Vector3d p_body = r.transpose() * (corr.board_point - p);
  const Eigen::Vector3d p_cam = state.calib.extrinsic_rotation.transpose() *
                                (p_body - state.calib.extrinsic_translation);
  return corr.pixel - project(p_cam, intr);
}

inline Eigen::Vector3d accelerometer_residual(const FullState& state,
                                              const ImuMeasurement& meas) {
  const Eigen::Matrix3d r = state.rotation_spline.value(meas.timestamp);
  const Eigen::Vector3d accel_w = state.position_spline.acceleration(meas.timestamp);
  const Eigen::Vector3d ideal = r.transpose() * (accel_w - state.calib.gravity_w);
  return meas.accel - imu_accel_model(ideal, state.calib.imu_intrinsics);
}

inline Eigen::Vector3d gyroscope_residual(const FullState& state,
                                          const ImuMeasurement& meas) {
  const Eigen::Vector3d omega =
      state.rotation_spline.angular_velocity(meas.timestamp, Frame::Body);
  return meas.gyro - imu_gyro_model(omega, state.calib.imu_intrinsics);
}

// ---------------------------------------------------------------------------
// Whole-problem evaluation
// ---------------------------------------------------------------------------

struct FactorStats {
  std::size_t count = 0;
  std::size_t skipped = 0;
  double sum_squared = 0.0;  // whitened
  std::size_t downweighted = 0;

  ResidualStats to_residual_stats(int residual_dim) const {
    ResidualStats s;
    s.count = count;
    s.rmse = count ? std::sqrt(sum_squared / static_cast<double>(residual_dim * count))
                   : 0.0;
    s.downweighted_fraction =
        count ? static_cast<double>(downweighted) / static_cast<double>(count) : 0.0;
    return s;
  }
};

struct Evaluation {
  double cost = 0.0;
  Eigen::VectorXd residuals;          // whitened, robust-scaled
  Eigen::SparseMatrix<double> jacobian;
  FactorStats reprojection;
  FactorStats accelerometer;
  FactorStats gyroscope;
};

/// Evaluates all factors at `state`. With `with_jacobians` the sparse Jacobian
/// of the whitened, robust-scaled residual vector is assembled.
inline Evaluation evaluate_factors(const FullState& state,
                                   const std::vector<GridPattern>& patterns,
                                   const std::vector<ImuMeasurement>& imu,
                                   const CameraIntrinsics& intr,
                                   const SolverOptions& opts,
                                   const StateLayout& layout,
                                   bool with_jacobians) {
  Evaluation ev;
  std::vector<double> residuals;
  std::vector<Eigen::Triplet<double>> triplets;
  residuals.reserve(2 * patterns.size() * (patterns.empty() ? 0 : patterns[0].points.size()) +
                    6 * imu.size());

  const CalibParams& calib = state.calib;
  const Eigen::Matrix3d r_cb_t = calib.extrinsic_rotation.transpose();
  const Eigen::Matrix<double, 3, 2> gravity_basis =
      gravity_tangent_basis(calib.gravity_w);
  const double inv_sp = 1.0 / opts.sigma_pixel;
  const double inv_sg = 1.0 / opts.sigma_gyro;
  const double inv_sa = 1.0 / opts.sigma_accel;
  const double delta2 = opts.huber_delta * opts.huber_delta;

  const auto emit_block = [&](std::size_t row, int col, const auto& block) {
    if (col < 0 || !with_jacobians) return;
    for (int r = 0; r < block.rows(); ++r) {
      for (int c = 0; c < block.cols(); ++c) {
        const double v = block(r, c);
        if (v != 0.0) {
          triplets.emplace_back(static_cast<int>(row) + r, col + c, v);
        }
      }
    }
  };

  // Visual reprojection factors (robustified).
  for (const GridPattern& pattern : patterns) {
    const double tau = pattern.timestamp + calib.time_offset;
    if (!state.rotation_spline.grid.contains(tau) ||
        !state.position_spline.grid.contains(tau)) {
      ev.reprojection.skipped += pattern.points.size();
      continue;
    }
    const RotationQuery rq = state.rotation_spline.query(tau, with_jacobians);
    const Eigen::Matrix3d r_wb_t = rq.value.transpose();  // world -> body
    const Eigen::Vector3d p_w = state.position_spline.value(tau);
    const Eigen::Vector3d v_w = state.position_spline.velocity(tau);
    const SegmentRef pos_seg = segment_locate(state.position_spline.grid, tau);
    const Eigen::Vector4d pos_w0 = control_point_weights(pos_seg.u, 0);

    for (const GridPattern::Correspondence& corr : pattern.points) {
      const Eigen::Vector3d p_body = r_wb_t * (corr.board_point - p_w);
      const Eigen::Vector3d p_cam = r_cb_t * (p_body - calib.extrinsic_translation);
      if (!(p_cam.z() > 0.0)) {
        ++ev.reprojection.skipped;
        continue;
      }
      const Eigen::Vector2d res = (corr.pixel - project(p_cam, intr)) * inv_sp;
      const double s = res.squaredNorm();
      ev.cost += huber_cost(s, opts.huber_delta);
      ++ev.reprojection.count;
      ev.reprojection.sum_squared += s;
      double weight = 1.0;
      if (s > delta2) {
        ++ev.reprojection.downweighted;
        weight = std::sqrt(opts.huber_delta / std::sqrt(s));
      }
      const std::size_t row = residuals.size();
      residuals.push_back(weight * res.x());
      residuals.push_back(weight * res.y());
      if (!with_jacobians) continue;

      const Eigen::Matrix<double, 2, 3> jproj = project_jacobian(p_cam, intr);
      // d residual / d p_cam, whitened and robust-scaled.
      const Eigen::Matrix<double, 2, 3> dres = -(weight * inv_sp) * jproj;
      if (layout.rot_base >= 0) {
        const Eigen::Matrix<double, 2, 3> dres_dtheta =
            dres * r_cb_t * skew(p_body);
        for (int m = 0; m < 4; ++m) {
          emit_block(row, layout.rot_base + 3 * (rq.segment + m),
                     Eigen::Matrix<double, 2, 3>(dres_dtheta * rq.dvalue_dcp[m]));
        }
      }
      if (layout.pos_base >= 0) {
        const Eigen::Matrix<double, 2, 3> dres_dp = dres * r_cb_t * (-r_wb_t);
        for (int m = 0; m < 4; ++m) {
          emit_block(row, layout.pos_base + 3 * (pos_seg.index + m),
                     Eigen::Matrix<double, 2, 3>(pos_w0[m] * dres_dp));
        }
      }
      if (layout.col_extrinsic_rotation >= 0) {
        emit_block(row, layout.col_extrinsic_rotation,
                   Eigen::Matrix<double, 2, 3>(dres * skew(p_cam)));
      }
      if (layout.col_extrinsic_translation >= 0) {
        emit_block(row, layout.col_extrinsic_translation,
                   Eigen::Matrix<double, 2, 3>(dres * (-r_cb_t)));
      }
      if (layout.col_time_offset >= 0) {
        const Eigen::Vector3d dpcam_dt =
            r_cb_t * (-skew(rq.omega_body) * p_body - r_wb_t * v_w);
        emit_block(row, layout.col_time_offset, Eigen::Vector2d(dres * dpcam_dt));
      }
    }
  }

  // Accelerometer and gyroscope factors (quadratic).
  for (const ImuMeasurement& meas : imu) {
    const double tau = meas.timestamp;
    const bool rot_ok = state.rotation_spline.grid.contains(tau);
    const bool pos_ok = state.position_spline.grid.contains(tau);

    if (rot_ok) {
      const RotationQuery rq = state.rotation_spline.query(tau, with_jacobians);
      const Eigen::Vector3d res =
          (meas.gyro - imu_gyro_model(rq.omega_body, calib.imu_intrinsics)) * inv_sg;
      ev.cost += res.squaredNorm();
      ++ev.gyroscope.count;
      ev.gyroscope.sum_squared += res.squaredNorm();
      const std::size_t row = residuals.size();
      residuals.push_back(res.x());
      residuals.push_back(res.y());
      residuals.push_back(res.z());
      if (with_jacobians) {
        const Eigen::Matrix3d dres_domega =
            -inv_sg * calib.imu_intrinsics.gyro_mapping;
        if (layout.rot_base >= 0) {
          for (int m = 0; m < 4; ++m) {
            emit_block(row, layout.rot_base + 3 * (rq.segment + m),
                       Eigen::Matrix3d(dres_domega * rq.domega_dcp[m]));
          }
        }
        if (layout.col_gyro_bias >= 0) {
          emit_block(row, layout.col_gyro_bias,
                     Eigen::Matrix3d(-inv_sg * Eigen::Matrix3d::Identity()));
        }
        if (layout.col_gyro_mapping >= 0) {
          emit_block(row, layout.col_gyro_mapping,
                     Eigen::Matrix<double, 3, 6>(
                         -inv_sg * mapping_param_jacobian(rq.omega_body)));
        }
      }

      if (pos_ok) {
        const Eigen::Matrix3d r_wb_t = rq.value.transpose();
        const Eigen::Vector3d accel_w = state.position_spline.acceleration(tau);
        const Eigen::Vector3d ideal = r_wb_t * (accel_w - calib.gravity_w);
        const Eigen::Vector3d ares =
            (meas.accel - imu_accel_model(ideal, calib.imu_intrinsics)) * inv_sa;
        ev.cost += ares.squaredNorm();
        ++ev.accelerometer.count;
        ev.accelerometer.sum_squared += ares.squaredNorm();
        const std::size_t arow = residuals.size();
        residuals.push_back(ares.x());
        residuals.push_back(ares.y());
        residuals.push_back(ares.z());
        if (with_jacobians) {
          const Eigen::Matrix3d dres_dideal =
              -inv_sa * calib.imu_intrinsics.accel_mapping;
          if (layout.rot_base >= 0) {
            const Eigen::Matrix3d dres_dtheta = dres_dideal * skew(ideal);
            for (int m = 0; m < 4; ++m) {
              emit_block(arow, layout.rot_base + 3 * (rq.segment + m),
                         Eigen::Matrix3d(dres_dtheta * rq.dvalue_dcp[m]));
            }
          }
          if (layout.pos_base >= 0) {
            const SegmentRef seg = segment_locate(state.position_spline.grid, tau);
            const Eigen::Vector4d w2 = control_point_weights(seg.u, 2);
            const double inv_dt2 =
                1.0 / (state.position_spline.grid.knot_spacing *
                       state.position_spline.grid.knot_spacing);
            const Eigen::Matrix3d dres_daw = dres_dideal * r_wb_t;
            for (int m = 0; m < 4; ++m) {
              emit_block(arow, layout.pos_base + 3 * (seg.index + m),
                         Eigen::Matrix3d((w2[m] * inv_dt2) * dres_daw));
            }
          }
          if (layout.col_gravity >= 0) {
            emit_block(arow, layout.col_gravity,
                       Eigen::Matrix<double, 3, 2>(
                           dres_dideal * r_wb_t * skew(calib.gravity_w) *
                           gravity_basis));
          }
          if (layout.col_accel_bias >= 0) {
            emit_block(arow, layout.col_accel_bias,
                       Eigen::Matrix3d(-inv_sa * Eigen::Matrix3d::Identity()));
          }
          if (layout.col_accel_mapping >= 0) {
            emit_block(arow, layout.col_accel_mapping,
                       Eigen::Matrix<double, 3, 6>(
                           -inv_sa * mapping_param_jacobian(ideal)));
          }
        }
      } else {
        ++ev.accelerometer.skipped;
      }
    } else {
      ++ev.gyroscope.skipped;
      ++ev.accelerometer.skipped;
    }
  }

  ev.residuals = Eigen::Map<Eigen::VectorXd>(residuals.data(), residuals.size());
  if (with_jacobians) {
    ev.jacobian.resize(static_cast<int>(residuals.size()), layout.dim);
    ev.jacobian.setFromTriplets(triplets.begin(), triplets.end());
  }
  return ev;
}

/// Pads both splines by the time-offset bound so offset updates can never
/// leave the evaluation domain, and makes sure all IMU samples are covered.
/// The initializer already guarantees this; kept as a cheap no-op safety net
/// for states assembled by hand.
inline FullState pad_state_for_optimization(const InitializerState& init,
                                            const std::vector<GridPattern>& patterns,
                                            const std::vector<ImuMeasurement>& imu,
                                            const SolverOptions& opts) {
  FullState state;
  state.rotation_spline = init.rotation_spline;
  state.position_spline = init.position_spline;
  state.calib = init.calib;

  double lo = imu.front().timestamp;
  double hi = imu.back().timestamp;
  for (const GridPattern& p : patterns) {
    lo = std::min(lo, p.timestamp - opts.time_offset_bound);
    hi = std::max(hi, p.timestamp + opts.time_offset_bound);
  }
  const double margin = 2.0 * state.rotation_spline.grid.knot_spacing;
  extend_spline_cover(state.rotation_spline, lo - margin, hi + margin);
  extend_spline_cover(state.position_spline, lo - margin, hi + margin);
  return state;
}

/// Continuous-time batch refinement: damped least squares over all active
/// blocks with Huber-robust reprojection factors.
inline std::pair<FullState, CalibrationReport> batch_optimize(
    const InitializerState& init, const std::vector<GridPattern>& patterns,
    const std::vector<ImuMeasurement>& imu, const CameraIntrinsics& intr,
    const SolverOptions& opts) {
  const auto t_start = std::chrono::steady_clock::now();
  if (imu.empty()) throw CalibError(Stage::Optimize, "no IMU measurements");

  FullState state = pad_state_for_optimization(init, patterns, imu, opts);
  const StateLayout layout = StateLayout::build(state, opts);

  CalibrationReport report;
  report.initializer = init.summary;

  Evaluation ev = evaluate_factors(state, patterns, imu, intr, opts, layout, true);
  report.initial_cost = ev.cost;
  double cost = ev.cost;
  double lambda = 1e-6;
  std::string termination = "max_iterations";
  bool converged = false;

  const auto push_trace = [&](int iter, double c, double gnorm, bool accepted) {
    report.trace.push_back({iter, c, gnorm, lambda, accepted});
  };

  if (layout.dim == 0) {
    termination = "all_blocks_locked";
    converged = true;
    push_trace(0, cost, 0.0, true);
  }

  int iteration = 0;
  while (layout.dim > 0 && iteration < opts.max_iterations) {
    const Eigen::SparseMatrix<double> jt = ev.jacobian.transpose();
    Eigen::SparseMatrix<double> hessian = jt * ev.jacobian;
    const Eigen::VectorXd gradient = jt * ev.residuals;
    const double gnorm = gradient.lpNorm<Eigen::Infinity>();
    push_trace(iteration, cost, gnorm, true);
    if (cost < opts.cost_floor) {
      termination = "cost_floor";
      converged = true;
      break;
    }
    if (gnorm < opts.gradient_tolerance) {
      termination = "gradient_tolerance";
      converged = true;
      break;
    }

    Eigen::VectorXd diag(layout.dim);
    for (int i = 0; i < layout.dim; ++i) diag[i] = hessian.coeff(i, i);

    bool accepted = false;
    int rejects = 0;
    while (rejects < 10) {
      Eigen::SparseMatrix<double> damped = hessian;
      for (int i = 0; i < layout.dim; ++i) {
        damped.coeffRef(i, i) = diag[i] + lambda * std::max(diag[i], 1e-9);
      }
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(damped);
      if (solver.info() != Eigen::Success) {
        lambda *= 10.0;
        ++rejects;
        continue;
      }
      const Eigen::VectorXd dx = solver.solve(-gradient);
      if (dx.lpNorm<Eigen::Infinity>() < opts.step_tolerance) {
        // At numerical precision already; nothing left to gain.
        termination = "step_tolerance";
        converged = true;
        accepted = true;
        break;
      }
      const FullState trial = retract(state, layout, dx, opts);
      Evaluation trial_ev =
          evaluate_factors(trial, patterns, imu, intr, opts, layout, false);
      if (trial_ev.cost < cost) {
        const double decrease = (cost - trial_ev.cost) / std::max(cost, 1e-300);
        state = trial;
        cost = trial_ev.cost;
        lambda = std::max(lambda / 3.0, 1e-14);
        accepted = true;
        if (decrease < opts.function_tolerance) {
          termination = "function_tolerance";
          converged = true;
        }
        break;
      }
      lambda *= 4.0;
      ++rejects;
    }
    ++iteration;
    if (!accepted) {
      termination = "divergence";
      converged = false;
      break;
    }
    if (converged) break;
    ev = evaluate_factors(state, patterns, imu, intr, opts, layout, true);
  }
  if (layout.dim > 0 && iteration >= opts.max_iterations) {
    converged = true;  // ran to the iteration budget without diverging
    termination = "max_iterations";
  }

  // Final evaluation for the report.
  Evaluation final_ev =
      evaluate_factors(state, patterns, imu, intr, opts, layout, true);
  report.final_cost = final_ev.cost;
  double final_gnorm = 0.0;
  if (layout.dim > 0) {
    final_gnorm = (Eigen::SparseMatrix<double>(final_ev.jacobian.transpose()) *
                   final_ev.residuals)
                      .lpNorm<Eigen::Infinity>();
  }
  push_trace(iteration, final_ev.cost, final_gnorm, converged);
  report.iterations = iteration;
  report.converged = converged;
  report.termination = termination;
  report.estimate = state.calib;
  report.residual_stats["reprojection"] = final_ev.reprojection.to_residual_stats(2);
  report.residual_stats["accelerometer"] = final_ev.accelerometer.to_residual_stats(3);
  report.residual_stats["gyroscope"] = final_ev.gyroscope.to_residual_stats(3);
  ResidualStats skipped;
  skipped.count = final_ev.reprojection.skipped + final_ev.accelerometer.skipped +
                  final_ev.gyroscope.skipped;
  report.residual_stats["skipped"] = skipped;
  report.optimize_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  report.total_seconds = report.optimize_seconds;
  return {state, report};
}

}  // namespace splinecal
