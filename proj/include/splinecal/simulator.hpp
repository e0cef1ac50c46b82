#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "splinecal/calib_params.hpp"
#include "splinecal/data_io.hpp"
#include "splinecal/errors.hpp"
#include "splinecal/lie.hpp"
#include "splinecal/sensor_models.hpp"
#include "splinecal/spline.hpp"

namespace splinecal {

/// Deterministic random stream: raw mt19937_64 bits mapped to doubles and a
/// hand-rolled Box-Muller transform, so streams do not depend on the standard
/// library's distribution implementations.
class SimRng {
 public:
  explicit SimRng(std::uint64_t seed) : engine_(seed) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

  std::uint64_t integer(std::uint64_t n) { return engine_() % n; }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

struct SimNoiseSpec {
  double gyro_sigma = 0.0;   // rad/s per sample
  double accel_sigma = 0.0;  // m/s^2 per sample
  double pixel_sigma = 0.0;  // px
  double dropout = 0.0;      // probability a whole pattern is dropped
  double incomplete = 0.0;   // probability a pattern loses a random subset
};

enum class TrajectoryPreset { Sinusoidal, FigureEight, Static };

struct SimSpec {
  TrajectoryPreset preset = TrajectoryPreset::Sinusoidal;
  double duration = 30.0;      // s
  double imu_rate = 200.0;     // Hz
  double obs_rate = 50.0;      // Hz
  int board_rows = 3;
  int board_cols = 7;
  double board_spacing = 0.05;       // m
  double truth_knot_spacing = 0.05;  // s
  CameraIntrinsics camera;
  CalibParams calib;
  SimNoiseSpec noise;
  std::uint64_t seed = 1;

  SimSpec() {
    camera.fx = 200.0;
    camera.fy = 200.0;
    camera.cx = 173.0;
    camera.cy = 130.0;
    camera.width = 346;
    camera.height = 260;
    calib.extrinsic_rotation = rotation_from_euler_zyx(
        179.8 * M_PI / 180.0, 0.3 * M_PI / 180.0, -179.8 * M_PI / 180.0);
    calib.extrinsic_translation = {-0.0001, -0.004, -0.054};
    calib.time_offset = 0.0015;
    calib.gravity_w = {0.0, 0.0, -9.80665};
  }

  void validate() const {
    if (!(duration > 0.0) || !(imu_rate > 0.0) || !(obs_rate > 0.0)) {
      throw CalibError(Stage::Config, "simulation rates and duration must be positive");
    }
    if (board_rows < 2 || board_cols < 2 || !(board_spacing > 0.0)) {
      throw CalibError(Stage::Config, "invalid board geometry");
    }
    if (noise.dropout < 0.0 || noise.dropout > 1.0 || noise.incomplete < 0.0 ||
        noise.incomplete > 1.0) {
      throw CalibError(Stage::Config, "probabilities must lie in [0, 1]");
    }
    if (noise.gyro_sigma < 0.0 || noise.accel_sigma < 0.0 || noise.pixel_sigma < 0.0) {
      throw CalibError(Stage::Config, "noise sigmas must be nonnegative");
    }
    camera.validate();
  }
};

struct TrajectoryTruth {
  RotationSpline rotation;  // R_b^w
  PositionSpline position;  // p_b^w
};

/// Asymmetric (staggered) circle grid: row pitch = col pitch = spacing, odd
/// rows shifted by half a spacing, centered on the board origin, z = 0.
inline std::vector<Eigen::Vector3d> make_board(int rows, int cols, double spacing) {
  const double x_extent = (cols - 1) * spacing + (rows > 1 ? 0.5 * spacing : 0.0);
  const double y_extent = (rows - 1) * spacing;
  std::vector<Eigen::Vector3d> points;
  points.reserve(rows * cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      points.emplace_back(c * spacing + (r % 2) * 0.5 * spacing - 0.5 * x_extent,
                          r * spacing - 0.5 * y_extent, 0.0);
    }
  }
  return points;
}

namespace detail {

/// Camera orientation with the optical axis aimed at the board origin.
inline Eigen::Matrix3d look_at_board(const Eigen::Vector3d& camera_position) {
  const Eigen::Vector3d z = -camera_position.normalized();
  Eigen::Vector3d x = Eigen::Vector3d(0.0, 1.0, 0.0).cross(z);
  if (x.norm() < 1e-6) x = Eigen::Vector3d(1.0, 0.0, 0.0).cross(z);
  x.normalize();
  const Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix3d r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return r;
}

struct CameraPoseSample {
  Eigen::Matrix3d rotation;  // R_c^w
  Eigen::Vector3d position;  // t_c^w
};

inline CameraPoseSample preset_camera_pose(TrajectoryPreset preset, double t) {
  constexpr double deg = M_PI / 180.0;
  CameraPoseSample s;
  switch (preset) {
    case TrajectoryPreset::Static: {
      s.position = {0.0, 0.0, 0.6};
      s.rotation = look_at_board(s.position);
      return s;
    }
    case TrajectoryPreset::Sinusoidal: {
      s.position = {0.25 * std::sin(2.0 * M_PI * 0.4 * t),
                    0.20 * std::sin(2.0 * M_PI * 0.5 * t + 0.7),
                    0.6 + 0.12 * std::sin(2.0 * M_PI * 0.6 * t + 1.3)};
      // The faster low-amplitude terms sharpen the angular-speed
      // autocorrelation, which the correlation-based offset search relies on.
      const Eigen::Vector3d wobble(
          10.0 * deg * std::sin(2.0 * M_PI * 0.3 * t + 0.4) +
              3.0 * deg * std::sin(2.0 * M_PI * 2.3 * t + 1.9),
          10.0 * deg * std::sin(2.0 * M_PI * 0.4 * t + 2.1) +
              3.0 * deg * std::sin(2.0 * M_PI * 2.9 * t + 0.6),
          30.0 * deg * std::sin(2.0 * M_PI * 0.5 * t + 5.0) +
              4.0 * deg * std::sin(2.0 * M_PI * 1.7 * t + 3.3));
      s.rotation = look_at_board(s.position) * so3_exp(wobble);
      return s;
    }
    case TrajectoryPreset::FigureEight: {
      const double th = 2.0 * M_PI * 0.25 * t;
      s.position = {0.25 * std::sin(th), 0.25 * std::sin(th) * std::cos(th),
                    0.6 + 0.10 * std::sin(2.0 * M_PI * 0.35 * t + 0.9)};
      const Eigen::Vector3d wobble(
          8.0 * deg * std::sin(2.0 * M_PI * 0.3 * t + 1.1),
          8.0 * deg * std::sin(2.0 * M_PI * 0.45 * t + 0.2),
          25.0 * deg * std::sin(2.0 * M_PI * 0.55 * t + 3.7));
      s.rotation = look_at_board(s.position) * so3_exp(wobble);
      return s;
    }
  }
  throw CalibError(Stage::Simulate, "unknown trajectory preset");
}

}  // namespace detail

/// Ground-truth body splines for the requested preset. The domain covers
/// [0, duration] with generous padding so queries shifted by any plausible
/// time offset stay inside.
inline TrajectoryTruth make_trajectory(const SimSpec& spec) {
  spec.validate();
  constexpr double pad = 0.3;
  const KnotGrid grid =
      extend_grid_for(-pad, spec.duration + pad, 0.0, spec.truth_knot_spacing);

  TrajectoryTruth truth;
  truth.rotation.grid = grid;
  truth.position.grid = grid;
  truth.rotation.control_points.reserve(grid.count);
  truth.position.control_points.reserve(grid.count);
  // A segment starting at knot i blends points (i .. i+3) and its value at
  // that knot matches the path one knot interval behind the control point, so
  // points are sampled at knot_time - spacing to track the closed-form path.
  for (int i = 0; i < grid.count; ++i) {
    const double t = grid.knot_time(i) - grid.knot_spacing;
    const detail::CameraPoseSample cam = detail::preset_camera_pose(spec.preset, t);
    const Eigen::Matrix3d r_b = cam.rotation * spec.calib.extrinsic_rotation.transpose();
    truth.rotation.control_points.push_back(r_b);
    truth.position.control_points.push_back(
        cam.position - r_b * spec.calib.extrinsic_translation);
  }
  return truth;
}

/// IMU stream sampled from the truth splines through the forward model, with
/// seeded Gaussian noise. Timestamps are on the IMU clock.
inline std::vector<ImuMeasurement> synthesize_imu(const TrajectoryTruth& truth,
                                                  const SimSpec& spec) {
  SimRng rng(spec.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<ImuMeasurement> out;
  const double dt = 1.0 / spec.imu_rate;
  const long ticks = std::lround(spec.duration / dt);
  out.reserve(ticks + 1);
  for (long k = 0; k <= ticks; ++k) {
    const double tau = k * dt;
    const Eigen::Matrix3d r = truth.rotation.value(tau);
    const Eigen::Vector3d omega_body = truth.rotation.angular_velocity(tau, Frame::Body);
    const Eigen::Vector3d accel_w = truth.position.acceleration(tau);
    const Eigen::Vector3d specific_force =
        r.transpose() * (accel_w - spec.calib.gravity_w);

    ImuMeasurement m;
    m.timestamp = tau;
    m.gyro = imu_gyro_model(omega_body, spec.calib.imu_intrinsics);
    m.accel = imu_accel_model(specific_force, spec.calib.imu_intrinsics);
    if (spec.noise.gyro_sigma > 0.0) {
      m.gyro += spec.noise.gyro_sigma *
                Eigen::Vector3d(rng.gaussian(), rng.gaussian(), rng.gaussian());
    }
    if (spec.noise.accel_sigma > 0.0) {
      m.accel += spec.noise.accel_sigma *
                 Eigen::Vector3d(rng.gaussian(), rng.gaussian(), rng.gaussian());
    }
    out.push_back(m);
  }
  return out;
}

/// Grid observations on the camera clock (tau_c = tau_b - time_offset), with
/// pixel noise, whole-pattern dropout, and incomplete-pattern events.
inline std::vector<GridPattern> synthesize_grid_observations(
    const TrajectoryTruth& truth, const SimSpec& spec) {
  SimRng rng(spec.seed ^ 0x7f4a7c159e3779b9ull);
  const std::vector<Eigen::Vector3d> board =
      make_board(spec.board_rows, spec.board_cols, spec.board_spacing);
  const std::size_t full = board.size();

  std::vector<GridPattern> out;
  const double dt = 1.0 / spec.obs_rate;
  const long ticks = std::lround(spec.duration / dt);
  long invalid = 0;
  for (long k = 0; k <= ticks; ++k) {
    const double tau_c = k * dt;
    const double tau_b = tau_c + spec.calib.time_offset;
    const double u_drop = rng.uniform();
    const double u_incomplete = rng.uniform();

    const Eigen::Matrix3d r_b = truth.rotation.value(tau_b);
    const Eigen::Vector3d p_b = truth.position.value(tau_b);
    const Eigen::Matrix3d r_c = r_b * spec.calib.extrinsic_rotation;
    const Eigen::Vector3d p_c = p_b + r_b * spec.calib.extrinsic_translation;

    GridPattern pat;
    pat.timestamp = tau_c;
    for (const Eigen::Vector3d& bp : board) {
      const Eigen::Vector3d in_cam = r_c.transpose() * (bp - p_c);
      if (!(in_cam.z() > 0.0)) continue;
      const Pixel px = project(in_cam, spec.camera);
      if (px.x() < 0.0 || px.x() >= spec.camera.width || px.y() < 0.0 ||
          px.y() >= spec.camera.height) {
        continue;
      }
      pat.points.push_back({px, bp});
    }
    if (pat.points.size() < 4) {
      ++invalid;
      continue;
    }
    if (u_drop < spec.noise.dropout) continue;

    if (u_incomplete < spec.noise.incomplete && pat.points.size() > 4) {
      const std::size_t keep =
          4 + static_cast<std::size_t>(rng.integer(pat.points.size() - 4));
      for (std::size_t i = 0; i < keep; ++i) {
        const std::size_t j = i + rng.integer(pat.points.size() - i);
        std::swap(pat.points[i], pat.points[j]);
      }
      pat.points.resize(keep);
    }
    pat.complete = (pat.points.size() == full);
    if (spec.noise.pixel_sigma > 0.0) {
      for (auto& c : pat.points) {
        c.pixel += spec.noise.pixel_sigma * Eigen::Vector2d(rng.gaussian(), rng.gaussian());
      }
    }
    out.push_back(std::move(pat));
  }
  if (invalid > 0.1 * (ticks + 1)) {
    throw CalibError(Stage::Simulate,
                     "preset violation: board out of view for " +
                         std::to_string(invalid) + " of " +
                         std::to_string(ticks + 1) + " ticks");
  }
  return out;
}

/// Error metrics between an estimate and the injected truth, in the units
/// used for reporting (degrees, centimeters, milliseconds).
struct CalibDelta {
  double rotation_angle_deg = 0.0;
  Eigen::Vector3d euler_delta_deg = Eigen::Vector3d::Zero();  // roll, pitch, yaw
  Eigen::Vector3d translation_delta_cm = Eigen::Vector3d::Zero();
  double translation_norm_cm = 0.0;
  double offset_delta_ms = 0.0;
  double gravity_angle_deg = 0.0;
};

inline double wrap_degrees(double deg) {
  while (deg > 180.0) deg -= 360.0;
  while (deg < -180.0) deg += 360.0;
  return deg;
}

inline CalibDelta compare_calibrations(const CalibParams& estimate,
                                       const CalibParams& truth) {
  constexpr double rad2deg = 180.0 / M_PI;
  CalibDelta d;
  d.rotation_angle_deg =
      so3_log(estimate.extrinsic_rotation * truth.extrinsic_rotation.transpose())
          .norm() * rad2deg;
  const Eigen::Vector3d euler_est =
      euler_zyx_from_rotation(estimate.extrinsic_rotation) * rad2deg;
  const Eigen::Vector3d euler_true =
      euler_zyx_from_rotation(truth.extrinsic_rotation) * rad2deg;
  for (int i = 0; i < 3; ++i) {
    d.euler_delta_deg[i] = wrap_degrees(euler_est[i] - euler_true[i]);
  }
  d.translation_delta_cm =
      (estimate.extrinsic_translation - truth.extrinsic_translation) * 100.0;
  d.translation_norm_cm = d.translation_delta_cm.norm();
  d.offset_delta_ms = (estimate.time_offset - truth.time_offset) * 1000.0;
  const Eigen::Vector3d ge = estimate.gravity_w.normalized();
  const Eigen::Vector3d gt = truth.gravity_w.normalized();
  d.gravity_angle_deg = std::atan2(ge.cross(gt).norm(), ge.dot(gt)) * rad2deg;
  return d;
}

// ---------------------------------------------------------------------------
// Dataset files: the data_io schemas plus a ground-truth JSON for oracles.
// ---------------------------------------------------------------------------

struct TruthFile {
  CalibParams calib;
  RotationSpline rotation;
  PositionSpline position;
};

inline json to_json(const KnotGrid& g) {
  return json{{"start_time", g.start_time},
              {"knot_spacing", g.knot_spacing},
              {"count", g.count}};
}

inline KnotGrid knot_grid_from_json(const json& j) {
  KnotGrid g;
  g.start_time = j.at("start_time").get<double>();
  g.knot_spacing = j.at("knot_spacing").get<double>();
  g.count = j.at("count").get<int>();
  return g;
}

inline void write_truth(const TruthFile& truth, const std::string& path) {
  json rot_cps = json::array();
  for (const Eigen::Matrix3d& r : truth.rotation.control_points) {
    rot_cps.push_back(to_json(r));
  }
  json pos_cps = json::array();
  for (const Eigen::Vector3d& p : truth.position.control_points) {
    pos_cps.push_back(to_json(p));
  }
  const json j{{"calibration", to_json(truth.calib)},
               {"rotation_spline",
                json{{"grid", to_json(truth.rotation.grid)}, {"control_points", rot_cps}}},
               {"position_spline",
                json{{"grid", to_json(truth.position.grid)}, {"control_points", pos_cps}}}};
  std::ofstream out(path);
  if (!out) throw CalibError(Stage::Io, "cannot write truth file: " + path);
  out << j.dump(2) << "\n";
  if (!out.good()) throw CalibError(Stage::Io, "write failed: " + path);
}

inline TruthFile load_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CalibError(Stage::Io, "cannot open truth file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw CalibError(Stage::Io, path + ": " + e.what());
  }
  TruthFile t;
  t.calib = calib_params_from_json(j.at("calibration"));
  t.rotation.grid = knot_grid_from_json(j.at("rotation_spline").at("grid"));
  for (const json& r : j.at("rotation_spline").at("control_points")) {
    t.rotation.control_points.push_back(matrix3_from_json(r));
  }
  t.position.grid = knot_grid_from_json(j.at("position_spline").at("grid"));
  for (const json& p : j.at("position_spline").at("control_points")) {
    t.position.control_points.push_back(vector3_from_json(p));
  }
  return t;
}

inline json to_json(const SimSpec& s) {
  const char* preset = s.preset == TrajectoryPreset::Sinusoidal ? "sinusoidal"
                       : s.preset == TrajectoryPreset::FigureEight ? "figure_eight"
                                                                   : "static";
  return json{{"preset", preset},
              {"duration", s.duration},
              {"imu_rate_hz", s.imu_rate},
              {"obs_rate_hz", s.obs_rate},
              {"board", json{{"rows", s.board_rows},
                             {"cols", s.board_cols},
                             {"spacing", s.board_spacing}}},
              {"truth_knot_spacing", s.truth_knot_spacing},
              {"camera", to_json(s.camera)},
              {"calibration", to_json(s.calib)},
              {"noise", json{{"gyro_sigma", s.noise.gyro_sigma},
                             {"accel_sigma", s.noise.accel_sigma},
                             {"pixel_sigma", s.noise.pixel_sigma},
                             {"dropout", s.noise.dropout},
                             {"incomplete", s.noise.incomplete}}},
              {"seed", s.seed}};
}

inline SimSpec sim_spec_from_json(const json& j) {
  SimSpec s;
  if (j.contains("preset")) {
    const std::string p = j.at("preset").get<std::string>();
    if (p == "sinusoidal") {
      s.preset = TrajectoryPreset::Sinusoidal;
    } else if (p == "figure_eight") {
      s.preset = TrajectoryPreset::FigureEight;
    } else if (p == "static") {
      s.preset = TrajectoryPreset::Static;
    } else {
      throw CalibError(Stage::Config, "unknown trajectory preset: " + p);
    }
  }
  s.duration = j.value("duration", s.duration);
  s.imu_rate = j.value("imu_rate_hz", s.imu_rate);
  s.obs_rate = j.value("obs_rate_hz", s.obs_rate);
  if (j.contains("board")) {
    s.board_rows = j.at("board").value("rows", s.board_rows);
    s.board_cols = j.at("board").value("cols", s.board_cols);
    s.board_spacing = j.at("board").value("spacing", s.board_spacing);
  }
  s.truth_knot_spacing = j.value("truth_knot_spacing", s.truth_knot_spacing);
  if (j.contains("camera")) s.camera = camera_intrinsics_from_json(j.at("camera"));
  if (j.contains("calibration")) s.calib = calib_params_from_json(j.at("calibration"));
  if (j.contains("noise")) {
    const json& n = j.at("noise");
    s.noise.gyro_sigma = n.value("gyro_sigma", s.noise.gyro_sigma);
    s.noise.accel_sigma = n.value("accel_sigma", s.noise.accel_sigma);
    s.noise.pixel_sigma = n.value("pixel_sigma", s.noise.pixel_sigma);
    s.noise.dropout = n.value("dropout", s.noise.dropout);
    s.noise.incomplete = n.value("incomplete", s.noise.incomplete);
  }
  s.seed = j.value("seed", s.seed);
  return s;
}

inline SimSpec load_sim_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CalibError(Stage::Config, "cannot open simulation spec: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw CalibError(Stage::Config, path + ": " + e.what());
  }
  return sim_spec_from_json(j);
}

struct DatasetPaths {
  std::string observations;
  std::string imu;
  std::string truth;
  std::string config;
};

/// Generates a full dataset under `dir`: observations.jsonl, imu.csv,
/// truth.json, and a ready-to-use calibration config.json.
inline DatasetPaths write_dataset(const SimSpec& spec, const std::string& dir) {
  const TrajectoryTruth truth = make_trajectory(spec);
  const std::vector<ImuMeasurement> imu = synthesize_imu(truth, spec);
  const std::vector<GridPattern> patterns = synthesize_grid_observations(truth, spec);

  DatasetPaths paths;
  paths.observations = dir + "/observations.jsonl";
  paths.imu = dir + "/imu.csv";
  paths.truth = dir + "/truth.json";
  paths.config = dir + "/config.json";

  write_grid_observations(paths.observations, patterns);
  write_imu(paths.imu, imu);
  write_truth({spec.calib, truth.rotation, truth.position}, paths.truth);

  CalibConfig config;
  config.camera = spec.camera;
  config.rotation_knot_spacing = spec.truth_knot_spacing;
  config.position_knot_spacing = spec.truth_knot_spacing;
  config.gravity_magnitude = spec.calib.gravity_w.norm();
  if (spec.noise.gyro_sigma > 0.0) config.sigma_gyro = spec.noise.gyro_sigma;
  if (spec.noise.accel_sigma > 0.0) config.sigma_accel = spec.noise.accel_sigma;
  if (spec.noise.pixel_sigma > 0.0) config.sigma_pixel = spec.noise.pixel_sigma;
  config.time_offset_bound =
      std::max(0.1, 1.5 * std::abs(spec.calib.time_offset));
  config.seed = spec.seed;
  write_config(config, paths.config);
  return paths;
}

}  // namespace splinecal
