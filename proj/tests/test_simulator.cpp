#include <catch2/catch.hpp>

#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "splinecal/estimator.hpp"
#include "splinecal/simulator.hpp"

using namespace splinecal;

namespace {

Eigen::Matrix3d static_base_rotation() {
  // look-at orientation for a camera at (0, 0, 0.6) aimed at the origin
  Eigen::Matrix3d r;
  r << -1, 0, 0, 0, 1, 0, 0, 0, -1;
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("board generator staggers odd rows") {
  const auto board = make_board(3, 7, 0.05);
  REQUIRE(board.size() == 21);
  for (const auto& p : board) CHECK(p.z() == 0.0);
  // Row pitch and column pitch equal the spacing; odd rows offset by half.
  CHECK(board[1].x() - board[0].x() == Approx(0.05));
  CHECK(board[7].x() - board[0].x() == Approx(0.025));
  CHECK(board[7].y() - board[0].y() == Approx(0.05));
  // No duplicates.
  for (std::size_t i = 0; i < board.size(); ++i) {
    for (std::size_t j = i + 1; j < board.size(); ++j) {
      CHECK((board[i] - board[j]).norm() > 1e-6);
    }
  }
}

TEST_CASE("static trajectory has zero kinematics") {
  SimSpec spec;
  spec.preset = TrajectoryPreset::Static;
  spec.duration = 5.0;
  const TrajectoryTruth truth = make_trajectory(spec);
  for (double tau : {0.0, 1.3, 4.9}) {
    CHECK(truth.rotation.angular_velocity(tau, Frame::Body).norm() < 1e-12);
    CHECK(truth.position.velocity(tau).norm() < 1e-12);
    CHECK(truth.position.acceleration(tau).norm() < 1e-12);
  }
}

TEST_CASE("sinusoidal trajectory excites all axes and covers the padded domain") {
  SimSpec spec;
  spec.duration = 10.0;
  const TrajectoryTruth truth = make_trajectory(spec);
  CHECK(truth.rotation.grid.domain_begin() <= -0.25);
  CHECK(truth.rotation.grid.domain_end() > spec.duration + 0.25);

  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  std::vector<Eigen::Vector3d> samples;
  for (double tau = 0.0; tau < spec.duration; tau += 0.01) {
    samples.push_back(truth.rotation.angular_velocity(tau, Frame::Body));
    mean += samples.back();
  }
  mean /= static_cast<double>(samples.size());
  Eigen::Vector3d var = Eigen::Vector3d::Zero();
  for (const auto& s : samples) var += (s - mean).cwiseAbs2();
  var /= static_cast<double>(samples.size());
  CHECK(var.minCoeff() > 0.01);  // rad^2/s^2 on every axis
}

TEST_CASE("static IMU measures gravity only") {
  SimSpec spec;
  spec.preset = TrajectoryPreset::Static;
  spec.duration = 3.0;
  spec.calib.extrinsic_rotation = static_base_rotation();  // body frame = world
  spec.calib.extrinsic_translation.setZero();
  spec.calib.time_offset = 0.0;
  const TrajectoryTruth truth = make_trajectory(spec);
  const auto imu = synthesize_imu(truth, spec);
  REQUIRE(imu.size() == 601);
  for (const auto& m : imu) {
    CHECK((m.accel - Eigen::Vector3d(0, 0, 9.80665)).norm() < 1e-9);
    CHECK(m.gyro.norm() < 1e-12);
  }
}

TEST_CASE("noise-free gyro equals the truth-spline body rate") {
  SimSpec spec;
  spec.duration = 4.0;
  const TrajectoryTruth truth = make_trajectory(spec);
  const auto imu = synthesize_imu(truth, spec);
  for (std::size_t k = 0; k < imu.size(); k += 37) {
    const Eigen::Vector3d expected =
        truth.rotation.angular_velocity(imu[k].timestamp, Frame::Body);
    CHECK((imu[k].gyro - expected).norm() == 0.0);
  }
}

TEST_CASE("noise-free observations have zero reprojection residual") {
  SimSpec spec;
  spec.duration = 4.0;
  spec.obs_rate = 20.0;
  const TrajectoryTruth truth = make_trajectory(spec);
  const auto patterns = synthesize_grid_observations(truth, spec);
  REQUIRE(patterns.size() == 81);

  FullState state;
  state.rotation_spline = truth.rotation;
  state.position_spline = truth.position;
  state.calib = spec.calib;
  for (const auto& pattern : patterns) {
    CHECK(pattern.complete);
    for (const auto& corr : pattern.points) {
      CHECK(reprojection_residual(state, spec.camera, pattern.timestamp, corr).norm() <
            1e-9);
    }
  }
}

TEST_CASE("dropout removes about the expected fraction of patterns") {
  SimSpec spec;
  spec.duration = 20.0;
  spec.obs_rate = 50.0;
  spec.noise.dropout = 0.2;
  const TrajectoryTruth truth = make_trajectory(spec);
  const auto patterns = synthesize_grid_observations(truth, spec);
  const double n = 20.0 * 50.0 + 1;
  const double expected = 0.8 * n;
  const double sigma = std::sqrt(n * 0.2 * 0.8);
  CHECK(std::abs(static_cast<double>(patterns.size()) - expected) < 5.0 * sigma);
}

TEST_CASE("incomplete patterns keep at least four points") {
  SimSpec spec;
  spec.duration = 10.0;
  spec.obs_rate = 30.0;
  spec.noise.incomplete = 0.5;
  const TrajectoryTruth truth = make_trajectory(spec);
  const auto patterns = synthesize_grid_observations(truth, spec);
  std::size_t incomplete = 0;
  for (const auto& p : patterns) {
    CHECK(p.points.size() >= 4);
    if (!p.complete) ++incomplete;
    CHECK(p.complete == (p.points.size() == 21));
  }
  CHECK(incomplete > patterns.size() / 4);
}

TEST_CASE("camera behind the board trips the preset violation") {
  SimSpec spec;
  spec.duration = 3.0;
  spec.preset = TrajectoryPreset::Static;
  const TrajectoryTruth truth = make_trajectory(spec);
  TrajectoryTruth behind = truth;
  // Push the rig through the board plane; the grid is no longer visible.
  for (auto& p : behind.position.control_points) p.z() = -p.z();
  CHECK_THROWS_AS(synthesize_grid_observations(behind, spec), CalibError);
}

TEST_CASE("seeded determinism of generated datasets") {
  SimSpec spec;
  spec.duration = 3.0;
  spec.noise.gyro_sigma = 0.005;
  spec.noise.accel_sigma = 0.02;
  spec.noise.pixel_sigma = 0.5;
  spec.noise.dropout = 0.1;
  spec.noise.incomplete = 0.2;
  spec.seed = 99;

  namespace fs = std::filesystem;
  const fs::path dir_a = fs::temp_directory_path() / "splinecal_sim_a";
  const fs::path dir_b = fs::temp_directory_path() / "splinecal_sim_b";
  fs::create_directories(dir_a);
  fs::create_directories(dir_b);
  const DatasetPaths a = write_dataset(spec, dir_a.string());
  const DatasetPaths b = write_dataset(spec, dir_b.string());
  CHECK(slurp(a.observations) == slurp(b.observations));
  CHECK(slurp(a.imu) == slurp(b.imu));
  CHECK(slurp(a.truth) == slurp(b.truth));
  CHECK(!slurp(a.observations).empty());

  // A different seed changes the noisy streams.
  SimSpec other = spec;
  other.seed = 100;
  const fs::path dir_c = fs::temp_directory_path() / "splinecal_sim_c";
  fs::create_directories(dir_c);
  const DatasetPaths c = write_dataset(other, dir_c.string());
  CHECK(slurp(a.imu) != slurp(c.imu));
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  fs::remove_all(dir_c);
}

TEST_CASE("truth file round trip") {
  SimSpec spec;
  spec.duration = 2.0;
  const TrajectoryTruth truth = make_trajectory(spec);
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "splinecal_truth";
  fs::create_directories(dir);
  const std::string path = (dir / "truth.json").string();
  write_truth({spec.calib, truth.rotation, truth.position}, path);
  const TruthFile loaded = load_truth(path);
  CHECK(loaded.calib.extrinsic_rotation == spec.calib.extrinsic_rotation);
  CHECK(loaded.calib.time_offset == spec.calib.time_offset);
  REQUIRE(loaded.rotation.control_points.size() == truth.rotation.control_points.size());
  CHECK(loaded.rotation.control_points[5] == truth.rotation.control_points[5]);
  CHECK(loaded.position.control_points[7] == truth.position.control_points[7]);
  CHECK(loaded.rotation.grid.start_time == truth.rotation.grid.start_time);
  fs::remove_all(dir);
}

TEST_CASE("compare_calibrations metrics") {
  SimSpec spec;
  const CalibParams truth = spec.calib;

  const CalibDelta zero = compare_calibrations(truth, truth);
  CHECK(zero.rotation_angle_deg == Approx(0.0).margin(1e-12));
  CHECK(zero.euler_delta_deg.norm() == Approx(0.0).margin(1e-9));
  CHECK(zero.translation_norm_cm == Approx(0.0).margin(1e-12));
  CHECK(zero.offset_delta_ms == Approx(0.0).margin(1e-12));
  CHECK(zero.gravity_angle_deg == Approx(0.0).margin(1e-9));

  CalibParams rotated = truth;
  rotated.extrinsic_rotation = truth.extrinsic_rotation * so3_exp({0.001, 0, 0});
  const CalibDelta d = compare_calibrations(rotated, truth);
  CHECK(d.rotation_angle_deg == Approx(0.001 * 180.0 / M_PI).epsilon(1e-9));
  CHECK(d.rotation_angle_deg == Approx(0.0572957795).epsilon(1e-6));

  CalibParams offset = truth;
  offset.time_offset = truth.time_offset;  // same value -> zero delta
  CHECK(compare_calibrations(offset, truth).offset_delta_ms == 0.0);

  CalibParams shifted = truth;
  shifted.extrinsic_translation += Eigen::Vector3d(0.01, 0, 0);
  CHECK(compare_calibrations(shifted, truth).translation_delta_cm.x() == Approx(1.0));
}

TEST_CASE("sim spec json round trip") {
  SimSpec spec;
  spec.preset = TrajectoryPreset::FigureEight;
  spec.duration = 12.5;
  spec.board_rows = 4;
  spec.board_cols = 9;
  spec.noise.pixel_sigma = 0.25;
  spec.seed = 31337;
  const json j = to_json(spec);
  const SimSpec back = sim_spec_from_json(j);
  CHECK(back.preset == TrajectoryPreset::FigureEight);
  CHECK(back.duration == spec.duration);
  CHECK(back.board_rows == 4);
  CHECK(back.board_cols == 9);
  CHECK(back.noise.pixel_sigma == 0.25);
  CHECK(back.seed == 31337);
  CHECK(back.calib.extrinsic_rotation == spec.calib.extrinsic_rotation);

  SimSpec bad;
  bad.imu_rate = 0.0;
  CHECK_THROWS_AS(bad.validate(), CalibError);
}
