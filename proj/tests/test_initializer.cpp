#include <catch2/catch.hpp>

#include <random>

#include "helpers.hpp"
#include "splinecal/initializer.hpp"
#include "splinecal/simulator.hpp"

using namespace splinecal;

namespace {

SimSpec quick_spec(double duration = 8.0) {
  SimSpec spec;
  spec.duration = duration;
  spec.imu_rate = 200.0;
  spec.obs_rate = 30.0;
  spec.seed = 5;
  return spec;
}

CalibConfig config_for(const SimSpec& spec) {
  CalibConfig config;
  config.camera = spec.camera;
  config.rotation_knot_spacing = spec.truth_knot_spacing;
  config.position_knot_spacing = spec.truth_knot_spacing;
  config.gravity_magnitude = spec.calib.gravity_w.norm();
  config.time_offset_bound = std::max(0.1, 1.5 * std::abs(spec.calib.time_offset));
  return config;
}

}  // namespace

TEST_CASE("rotation spline fit on constant-rate gyro") {
  const Eigen::Vector3d w0(0, 0, 0.5);
  std::vector<ImuMeasurement> gyro;
  for (int k = 0; k <= 800; ++k) {
    ImuMeasurement m;
    m.timestamp = 0.005 * k;
    m.gyro = w0;
    gyro.push_back(m);
  }
  const KnotGrid grid = extend_grid_for(0.0, 4.0, 0.0, 0.05);
  double rmse = 0.0;
  const RotationSpline spline = fit_rotation_spline(gyro, grid, &rmse);
  CHECK(rmse < 1e-8);
  for (double tau : {0.1, 1.0, 2.5, 3.9}) {
    CHECK((spline.angular_velocity(tau, Frame::Body) - w0).norm() < 1e-6);
  }
  // Gauge: first control point locked to the identity.
  CHECK(test_helpers::matrix_error(spline.control_points[0],
                                   Eigen::Matrix3d::Identity()) == 0.0);
}

TEST_CASE("rotation spline fit on zero gyro is the identity") {
  std::vector<ImuMeasurement> gyro;
  for (int k = 0; k <= 400; ++k) {
    ImuMeasurement m;
    m.timestamp = 0.005 * k;
    gyro.push_back(m);
  }
  const KnotGrid grid = extend_grid_for(0.0, 2.0, 0.0, 0.05);
  const RotationSpline spline = fit_rotation_spline(gyro, grid);
  for (double tau : {0.0, 0.7, 1.9}) {
    CHECK(test_helpers::matrix_error(spline.value(tau), Eigen::Matrix3d::Identity()) <
          1e-12);
  }
}

TEST_CASE("rotation spline fit residual matches the injected noise level") {
  SimSpec spec = quick_spec(10.0);
  spec.noise.gyro_sigma = 0.005;
  const TrajectoryTruth truth = make_trajectory(spec);
  const auto imu = synthesize_imu(truth, spec);
  const KnotGrid grid =
      extend_grid_for(imu.front().timestamp, imu.back().timestamp, 0.0, 0.05);
  double rmse = 0.0;
  fit_rotation_spline(imu, grid, &rmse);
  CHECK(rmse == Approx(0.005).epsilon(0.2));
}

TEST_CASE("rotation spline fit flags empty windows") {
  std::vector<ImuMeasurement> gyro;
  for (int k = 0; k <= 400; ++k) {
    ImuMeasurement m;
    m.timestamp = 0.005 * k;
    if (m.timestamp > 0.8 && m.timestamp < 1.4) continue;  // 0.6 s hole
    gyro.push_back(m);
  }
  const KnotGrid grid = extend_grid_for(0.0, 2.0, 0.0, 0.05);
  CHECK_THROWS_AS(fit_rotation_spline(gyro, grid), CalibError);
}

TEST_CASE("noise-free rotation fit matches the simulated body rate") {
  SimSpec spec = quick_spec(6.0);
  const TrajectoryTruth truth = make_trajectory(spec);
  const auto imu = synthesize_imu(truth, spec);
  const KnotGrid grid =
      extend_grid_for(imu.front().timestamp, imu.back().timestamp, 0.0, 0.05);
  const RotationSpline spline = fit_rotation_spline(imu, grid);
  for (double tau = 0.2; tau < 5.8; tau += 0.37) {
    const Eigen::Vector3d expected = truth.rotation.angular_velocity(tau, Frame::Body);
    CHECK((spline.angular_velocity(tau, Frame::Body) - expected).norm() < 1e-5);
  }
}

TEST_CASE("cross correlation recovers a constructed shift") {
  // IMU speed series at 5 ms, camera series shifted so the offset is +15 ms.
  // The spectrum mimics hand-held excitation; the peak test needs the speed
  // autocorrelation to decay across the shift window.
  std::vector<std::pair<double, double>> imu_speed, cam_speed;
  const auto speed_of = [](double t) {
    return 1.5 + std::sin(2.0 * M_PI * 0.7 * t) + 0.6 * std::sin(2.0 * M_PI * 2.7 * t) +
           0.4 * std::sin(2.0 * M_PI * 4.3 * t + 0.8);
  };
  for (int k = 0; k <= 2000; ++k) {
    const double tb = 0.005 * k;
    imu_speed.emplace_back(tb, speed_of(tb));
  }
  const double true_offset = 0.015;
  for (int k = 0; k <= 300; ++k) {
    const double tc = 1.0 / 30.0 * k;
    cam_speed.emplace_back(tc, speed_of(tc + true_offset));
  }
  const CorrelationResult r = cross_correlate_offset(imu_speed, cam_speed, 0.1);
  CHECK(r.distinct);
  CHECK(r.offset == Approx(0.015).margin(1e-9));

  SECTION("zero shift") {
    std::vector<std::pair<double, double>> aligned;
    for (int k = 0; k <= 300; ++k) {
      const double tc = 1.0 / 30.0 * k;
      aligned.emplace_back(tc, speed_of(tc));
    }
    const CorrelationResult z = cross_correlate_offset(imu_speed, aligned, 0.1);
    CHECK(z.offset == Approx(0.0).margin(1e-9));
  }

  SECTION("flat series returns zero with a warning") {
    std::vector<std::pair<double, double>> flat_imu, flat_cam;
    for (int k = 0; k <= 2000; ++k) flat_imu.emplace_back(0.005 * k, 0.3);
    for (int k = 0; k <= 300; ++k) flat_cam.emplace_back(1.0 / 30.0 * k, 0.3);
    const CorrelationResult f = cross_correlate_offset(flat_imu, flat_cam, 0.1);
    CHECK_FALSE(f.distinct);
    CHECK(f.offset == 0.0);
  }

  SECTION("series shorter than 2 s are rejected") {
    std::vector<std::pair<double, double>> tiny{{0.0, 1.0}, {1.0, 1.0}};
    CHECK_THROWS_AS(cross_correlate_offset(tiny, cam_speed, 0.1), CalibError);
  }
}

TEST_CASE("hand-eye alignment on a noise-free rig") {
  SimSpec spec = quick_spec(8.0);
  spec.calib.extrinsic_rotation = so3_exp({0.0, 0.0, M_PI / 2});
  spec.calib.extrinsic_translation.setZero();
  spec.calib.time_offset = 0.0;
  const TrajectoryTruth truth = make_trajectory(spec);
  const auto imu = synthesize_imu(truth, spec);
  const auto patterns = synthesize_grid_observations(truth, spec);

  std::vector<CameraPose> poses;
  for (const auto& p : patterns) poses.push_back(solve_planar_pnp(p, spec.camera));

  const KnotGrid grid =
      extend_grid_for(imu.front().timestamp, imu.back().timestamp, 0.0, 0.05);
  const RotationSpline spline = fit_rotation_spline(imu, grid);
  const HandEyeResult he = rotation_hand_eye(poses, spline, 0.0, 0.02, 0.1);
  CHECK(so3_log(he.rotation.transpose() * spec.calib.extrinsic_rotation).norm() *
            180.0 / M_PI < 0.01);
  CHECK(std::abs(he.time_offset) < 1e-4);
}

TEST_CASE("hand-eye with identity extrinsics and zero offset") {
  SimSpec spec = quick_spec(8.0);
  spec.calib.extrinsic_rotation.setIdentity();
  spec.calib.extrinsic_translation.setZero();
  spec.calib.time_offset = 0.0;
  const TrajectoryTruth truth = make_trajectory(spec);
  const auto imu = synthesize_imu(truth, spec);
  const auto patterns = synthesize_grid_observations(truth, spec);
  std::vector<CameraPose> poses;
  for (const auto& p : patterns) poses.push_back(solve_planar_pnp(p, spec.camera));
  const KnotGrid grid =
      extend_grid_for(imu.front().timestamp, imu.back().timestamp, 0.0, 0.05);
  const RotationSpline spline = fit_rotation_spline(imu, grid);
  const HandEyeResult he = rotation_hand_eye(poses, spline, 0.0, 0.02, 0.1);
  CHECK(so3_log(he.rotation).norm() < 1e-4);
  CHECK(std::abs(he.time_offset) < 1e-4);
}

TEST_CASE("hand-eye rejects single-axis rotation") {
  // Pure roll about the camera optical axis, fixed position.
  SimSpec spec = quick_spec(6.0);
  const KnotGrid grid = extend_grid_for(-0.3, spec.duration + 0.3, 0.0, 0.05);
  TrajectoryTruth truth;
  truth.rotation.grid = grid;
  truth.position.grid = grid;
  Eigen::Matrix3d base;
  base << -1, 0, 0, 0, 1, 0, 0, 0, -1;
  for (int i = 0; i < grid.count; ++i) {
    const double t = grid.knot_time(i) - grid.knot_spacing;
    const Eigen::Matrix3d r_c =
        base * so3_exp({0.0, 0.0, 0.5 * std::sin(2.0 * M_PI * 0.4 * t)});
    truth.rotation.control_points.push_back(
        r_c * spec.calib.extrinsic_rotation.transpose());
    truth.position.control_points.push_back(
        Eigen::Vector3d(0, 0, 0.6) -
        truth.rotation.control_points.back() * spec.calib.extrinsic_translation);
  }
  const auto imu = synthesize_imu(truth, spec);
  const auto patterns = synthesize_grid_observations(truth, spec);
  std::vector<CameraPose> poses;
  for (const auto& p : patterns) poses.push_back(solve_planar_pnp(p, spec.camera));
  const RotationSpline spline = fit_rotation_spline(
      imu, extend_grid_for(imu.front().timestamp, imu.back().timestamp, 0.0, 0.05));
  try {
    rotation_hand_eye(poses, spline, 0.0, 0.02, 0.1);
    FAIL("expected observability error");
  } catch (const CalibError& e) {
    CHECK(e.stage() == Stage::HandEye);
    CHECK(std::string(e.what()).find("observability") != std::string::npos);
  }
}

TEST_CASE("world alignment is consistent at the anchor pose") {
  SimSpec spec = quick_spec(6.0);
  const TrajectoryTruth truth = make_trajectory(spec);
  const auto imu = synthesize_imu(truth, spec);
  const auto patterns = synthesize_grid_observations(truth, spec);
  std::vector<CameraPose> poses;
  for (const auto& p : patterns) poses.push_back(solve_planar_pnp(p, spec.camera));
  const RotationSpline spline_b0 = fit_rotation_spline(
      imu, extend_grid_for(imu.front().timestamp, imu.back().timestamp, 0.0, 0.05));
  const RotationSpline world = align_spline_to_world(
      spline_b0, poses, spec.calib.extrinsic_rotation, spec.calib.time_offset);

  // By construction the anchor pose matches exactly.
  const double tau0 = poses.front().timestamp + spec.calib.time_offset;
  CHECK(test_helpers::matrix_error(
            world.value(tau0) * spec.calib.extrinsic_rotation,
            poses.front().rotation) < 1e-9);

  // Against the simulator oracle the whole spline matches to fit accuracy.
  for (double tau = 0.5; tau < 5.5; tau += 0.61) {
    const double err_deg =
        so3_log(world.value(tau).transpose() * truth.rotation.value(tau)).norm() *
        180.0 / M_PI;
    CHECK(err_deg < 0.05);
  }

  // Identity transform leaves the spline unchanged.
  RotationSpline ident_aligned = spline_b0;
  for (auto& cp : ident_aligned.control_points)
    cp = Eigen::Matrix3d::Identity() * cp;
  CHECK(test_helpers::matrix_error(ident_aligned.value(1.0), spline_b0.value(1.0)) ==
        0.0);
}

TEST_CASE("alpha/beta integration of a constant specific force") {
  const KnotGrid grid = extend_grid_for(0.0, 1.0, 0.0, 0.05);
  const RotationSpline ident =
      constant_rotation_spline(grid, Eigen::Matrix3d::Identity());
  std::vector<ImuMeasurement> accel;
  for (int k = 0; k <= 200; ++k) {
    ImuMeasurement m;
    m.timestamp = 0.005 * k;
    m.accel = {0, 0, 1};
    accel.push_back(m);
  }
  const auto [alpha, beta] = integrate_alpha_beta(ident, accel, 0.2, 0.1);
  CHECK((alpha - Eigen::Vector3d(0, 0, 0.1)).norm() < 1e-9);
  CHECK((beta - Eigen::Vector3d(0, 0, 0.005)).norm() < 1e-9);

  SECTION("zero accel") {
    for (auto& m : accel) m.accel.setZero();
    const auto [a0, b0] = integrate_alpha_beta(ident, accel, 0.2, 0.1);
    CHECK(a0.norm() == 0.0);
    CHECK(b0.norm() == 0.0);
  }

  SECTION("zero window") {
    const auto [a0, b0] = integrate_alpha_beta(ident, accel, 0.2, 0.0);
    CHECK(a0.norm() == 0.0);
    CHECK(b0.norm() == 0.0);
  }

  SECTION("coverage gap") {
    std::vector<ImuMeasurement> gappy;
    for (const auto& m : accel) {
      if (m.timestamp > 0.22 && m.timestamp < 0.27) continue;
      gappy.push_back(m);
    }
    CHECK_THROWS_AS(integrate_alpha_beta(ident, gappy, 0.2, 0.1), CalibError);
  }
}

TEST_CASE("translation and gravity recovery on a noise-free rig") {
  SimSpec spec = quick_spec(8.0);
  spec.calib.extrinsic_translation = {0.10, 0.0, 0.0};
  spec.calib.time_offset = 0.0;
  const TrajectoryTruth truth = make_trajectory(spec);
  const auto imu = synthesize_imu(truth, spec);
  const auto patterns = synthesize_grid_observations(truth, spec);
  std::vector<CameraPose> poses;
  for (const auto& p : patterns) poses.push_back(solve_planar_pnp(p, spec.camera));
  const RotationSpline spline_b0 = fit_rotation_spline(
      imu, extend_grid_for(imu.front().timestamp, imu.back().timestamp, 0.0, 0.05));
  const RotationSpline world = align_spline_to_world(
      spline_b0, poses, spec.calib.extrinsic_rotation, spec.calib.time_offset);

  const TranslationGravityResult tg =
      recover_translation_gravity(poses, world, imu, 0.0, 9.80665);
  CHECK((tg.translation - spec.calib.extrinsic_translation).norm() < 1e-3);
  const double gravity_angle =
      std::atan2(tg.gravity.cross(spec.calib.gravity_w).norm(),
                 tg.gravity.dot(spec.calib.gravity_w)) * 180.0 / M_PI;
  CHECK(gravity_angle < 0.05);
  CHECK(tg.gravity.norm() == Approx(9.80665));  // renormalized exactly

  SECTION("zero-translation rig") {
    SimSpec zspec = quick_spec(8.0);
    zspec.calib.extrinsic_translation.setZero();
    zspec.calib.time_offset = 0.0;
    const TrajectoryTruth ztruth = make_trajectory(zspec);
    const auto zimu = synthesize_imu(ztruth, zspec);
    const auto zpatterns = synthesize_grid_observations(ztruth, zspec);
    std::vector<CameraPose> zposes;
    for (const auto& p : zpatterns) zposes.push_back(solve_planar_pnp(p, zspec.camera));
    const RotationSpline zspline = align_spline_to_world(
        fit_rotation_spline(zimu, extend_grid_for(zimu.front().timestamp,
                                                  zimu.back().timestamp, 0.0, 0.05)),
        zposes, zspec.calib.extrinsic_rotation, 0.0);
    const TranslationGravityResult ztg =
        recover_translation_gravity(zposes, zspline, zimu, 0.0, 9.80665);
    CHECK(ztg.translation.norm() < 1e-3);
  }
}

TEST_CASE("static data trips the excitation deficiency check") {
  SimSpec spec = quick_spec(6.0);
  spec.preset = TrajectoryPreset::Static;
  spec.calib.time_offset = 0.0;
  const TrajectoryTruth truth = make_trajectory(spec);
  const auto imu = synthesize_imu(truth, spec);
  const auto patterns = synthesize_grid_observations(truth, spec);
  std::vector<CameraPose> poses;
  for (const auto& p : patterns) poses.push_back(solve_planar_pnp(p, spec.camera));
  const RotationSpline spline = fit_rotation_spline(
      imu, extend_grid_for(imu.front().timestamp, imu.back().timestamp, 0.0, 0.05));
  try {
    recover_translation_gravity(poses, spline, imu, 0.0, 9.80665);
    FAIL("expected excitation deficiency");
  } catch (const CalibError& e) {
    CHECK(std::string(e.what()).find("excitation deficiency") != std::string::npos);
  }
}

TEST_CASE("position spline initialization") {
  SimSpec spec = quick_spec(8.0);
  const TrajectoryTruth truth = make_trajectory(spec);
  const auto imu = synthesize_imu(truth, spec);
  const auto patterns = synthesize_grid_observations(truth, spec);
  std::vector<CameraPose> poses;
  for (const auto& p : patterns) poses.push_back(solve_planar_pnp(p, spec.camera));
  const RotationSpline world = align_spline_to_world(
      fit_rotation_spline(imu, extend_grid_for(imu.front().timestamp,
                                               imu.back().timestamp, 0.0, 0.05)),
      poses, spec.calib.extrinsic_rotation, spec.calib.time_offset);

  double q_min = 1e30, q_max = -1e30;
  for (const auto& p : poses) {
    q_min = std::min(q_min, p.timestamp + spec.calib.time_offset);
    q_max = std::max(q_max, p.timestamp + spec.calib.time_offset);
  }
  const KnotGrid grid = extend_grid_for(q_min, q_max, 0.0, 0.05);
  double rmse = 0.0;
  const PositionSpline pos =
      init_position_spline(poses, world, spec.calib, grid, &rmse);
  CHECK(rmse < 1e-4);
  for (double tau = q_min + 0.3; tau < q_max - 0.3; tau += 0.47) {
    CHECK((pos.value(tau) - truth.position.value(tau)).norm() < 1e-3);
  }

  SECTION("a two-second observation hole is flagged") {
    std::vector<CameraPose> gappy;
    for (const auto& p : poses) {
      if (p.timestamp > 2.5 && p.timestamp < 4.5) continue;
      gappy.push_back(p);
    }
    try {
      init_position_spline(gappy, world, spec.calib, grid);
      FAIL("expected observability error");
    } catch (const CalibError& e) {
      CHECK(e.stage() == Stage::PositionFit);
      CHECK(std::string(e.what()).find("observability") != std::string::npos);
    }
  }
}

TEST_CASE("full initialization on a noise-free dataset") {
  SimSpec spec = quick_spec(10.0);
  const TrajectoryTruth truth = make_trajectory(spec);
  const auto imu = synthesize_imu(truth, spec);
  const auto patterns = synthesize_grid_observations(truth, spec);
  const CalibConfig config = config_for(spec);

  const InitializerState state = initialize(patterns, imu, config);
  const CalibDelta d = compare_calibrations(state.calib, spec.calib);
  CHECK(d.rotation_angle_deg < 0.5);
  CHECK(d.translation_norm_cm < 1.0);
  CHECK(std::abs(d.offset_delta_ms) < 1.0);
  CHECK(state.calib.gravity_w.norm() == Approx(config.gravity_magnitude));
  CHECK(state.summary.accepted_pose_count > 200);

  // Spline domains cover every measurement time shifted by any offset
  // within the configured bound.
  for (const auto& grid :
       {state.rotation_spline.grid, state.position_spline.grid}) {
    CHECK(grid.contains(imu.front().timestamp));
    CHECK(grid.contains(imu.back().timestamp));
    CHECK(grid.contains(patterns.front().timestamp - config.time_offset_bound));
    CHECK(grid.contains(patterns.back().timestamp + config.time_offset_bound));
  }

  SECTION("too few patterns") {
    std::vector<GridPattern> few(patterns.begin(), patterns.begin() + 10);
    CHECK_THROWS_AS(initialize(few, imu, config), CalibError);
  }
}

TEST_CASE("large injected offset is recovered by the correlation stage") {
  SimSpec spec = quick_spec(10.0);
  spec.calib.time_offset = 0.080;
  const TrajectoryTruth truth = make_trajectory(spec);
  const auto imu = synthesize_imu(truth, spec);
  const auto patterns = synthesize_grid_observations(truth, spec);
  CalibConfig config = config_for(spec);
  config.time_offset_bound = 0.12;

  const InitializerState state = initialize(patterns, imu, config);
  // Correlation must land within one IMU sample interval of the truth.
  CHECK(std::abs(state.summary.correlation_offset - 0.080) < 0.005 + 1e-9);
  // The hand-eye refinement then recovers the offset tightly.
  CHECK(std::abs(state.calib.time_offset - 0.080) < 5e-4);
}

TEST_CASE("initializer gauge invariance under a global world rotation") {
  SimSpec spec = quick_spec(8.0);
  spec.calib.time_offset = 0.0;
  const TrajectoryTruth truth = make_trajectory(spec);
  const auto imu = synthesize_imu(truth, spec);
  const auto patterns = synthesize_grid_observations(truth, spec);
  std::vector<CameraPose> poses;
  for (const auto& p : patterns) poses.push_back(solve_planar_pnp(p, spec.camera));

  std::mt19937_64 rng(77);
  const Eigen::Matrix3d global = test_helpers::random_rotation(rng);
  std::vector<CameraPose> rotated = poses;
  for (CameraPose& p : rotated) {
    p.rotation = global * p.rotation;
    p.position = global * p.position;
  }

  const RotationSpline spline = fit_rotation_spline(
      imu, extend_grid_for(imu.front().timestamp, imu.back().timestamp, 0.0, 0.05));
  const HandEyeResult a = rotation_hand_eye(poses, spline, 0.0, 0.02, 0.1);
  const HandEyeResult b = rotation_hand_eye(rotated, spline, 0.0, 0.02, 0.1);
  CHECK(so3_log(a.rotation.transpose() * b.rotation).norm() < 1e-6);
  CHECK(std::abs(a.time_offset - b.time_offset) < 1e-6);

  // Translation magnitude is also unchanged by the world-frame rotation.
  const RotationSpline world_a =
      align_spline_to_world(spline, poses, a.rotation, a.time_offset);
  const RotationSpline world_b =
      align_spline_to_world(spline, rotated, b.rotation, b.time_offset);
  const TranslationGravityResult tga =
      recover_translation_gravity(poses, world_a, imu, a.time_offset, 9.80665);
  const TranslationGravityResult tgb =
      recover_translation_gravity(rotated, world_b, imu, b.time_offset, 9.80665);
  CHECK(std::abs(tga.translation.norm() - tgb.translation.norm()) < 1e-6);
}

TEST_CASE("initializer time-shift covariance") {
  SimSpec spec = quick_spec(10.0);
  spec.calib.time_offset = 0.0;
  const TrajectoryTruth truth = make_trajectory(spec);
  const auto imu = synthesize_imu(truth, spec);
  const auto patterns = synthesize_grid_observations(truth, spec);
  CalibConfig config = config_for(spec);
  config.time_offset_bound = 0.1;

  const InitializerState base = initialize(patterns, imu, config);

  const double delta = 0.03;
  std::vector<GridPattern> shifted = patterns;
  for (GridPattern& p : shifted) p.timestamp += delta;
  const InitializerState moved = initialize(shifted, imu, config);
  // tau_b = tau_c + offset must stay invariant: offset absorbs -delta.
  CHECK(moved.calib.time_offset - base.calib.time_offset ==
        Approx(-delta).margin(0.005));
}

TEST_CASE("initializer is bit-reproducible") {
  SimSpec spec = quick_spec(6.0);
  const TrajectoryTruth truth = make_trajectory(spec);
  const auto imu = synthesize_imu(truth, spec);
  const auto patterns = synthesize_grid_observations(truth, spec);
  const CalibConfig config = config_for(spec);
  const InitializerState a = initialize(patterns, imu, config);
  const InitializerState b = initialize(patterns, imu, config);
  CHECK(a.calib.extrinsic_rotation == b.calib.extrinsic_rotation);
  CHECK(a.calib.extrinsic_translation == b.calib.extrinsic_translation);
  CHECK(a.calib.time_offset == b.calib.time_offset);
  CHECK(a.calib.gravity_w == b.calib.gravity_w);
  REQUIRE(a.position_spline.control_points.size() ==
          b.position_spline.control_points.size());
  CHECK(a.position_spline.control_points[5] == b.position_spline.control_points[5]);
}
