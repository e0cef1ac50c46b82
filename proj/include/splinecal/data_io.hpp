#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "splinecal/calib_params.hpp"
#include "splinecal/errors.hpp"
#include "splinecal/sensor_models.hpp"

namespace splinecal {

using nlohmann::json;

/// One timestamped set of tracked 2D circle centers paired with their 3D
/// board-frame centers (board plane z = 0). Timestamps are on the camera
/// clock.
struct GridPattern {
  struct Correspondence {
    Pixel pixel = Pixel::Zero();
    Eigen::Vector3d board_point = Eigen::Vector3d::Zero();
  };

  double timestamp = 0.0;
  bool complete = true;
  std::vector<Correspondence> points;
};

/// One IMU sample on the IMU clock.
struct ImuMeasurement {
  double timestamp = 0.0;
  Eigen::Vector3d gyro = Eigen::Vector3d::Zero();   // rad/s
  Eigen::Vector3d accel = Eigen::Vector3d::Zero();  // m/s^2
};

struct CalibConfig {
  CameraIntrinsics camera;
  double rotation_knot_spacing = 0.05;  // s
  double position_knot_spacing = 0.05;  // s
  double gravity_magnitude = 9.80665;   // m/s^2
  double sigma_gyro = 0.005;            // rad/s per sample
  double sigma_accel = 0.02;            // m/s^2 per sample
  double sigma_pixel = 0.5;             // px
  double time_offset_bound = 0.1;       // s
  bool estimate_imu_mapping = false;
  double huber_threshold = 1.0;         // whitened-residual units
  double pnp_rmse_threshold = 2.0;      // px
  int max_iterations = 50;
  double function_tolerance = 1e-12;
  double gradient_tolerance = 1e-10;
  std::uint64_t seed = 0;

  void validate() const {
    camera.validate();
    if (!(rotation_knot_spacing > 0.0) || !(position_knot_spacing > 0.0)) {
      throw CalibError(Stage::Config, "knot spacings must be positive");
    }
    if (!(sigma_gyro > 0.0) || !(sigma_accel > 0.0) || !(sigma_pixel > 0.0)) {
      throw CalibError(Stage::Config, "noise sigmas must be positive");
    }
    if (!(time_offset_bound > 0.0)) {
      throw CalibError(Stage::Config, "time offset bound must be positive");
    }
    if (!(gravity_magnitude > 0.0)) {
      throw CalibError(Stage::Config, "gravity magnitude must be positive");
    }
    if (!(huber_threshold > 0.0) || !(function_tolerance > 0.0) ||
        !(gradient_tolerance > 0.0) || max_iterations < 1) {
      throw CalibError(Stage::Config, "invalid solver limits");
    }
  }
};

struct ResidualStats {
  std::size_t count = 0;
  double rmse = 0.0;                  // whitened units
  double downweighted_fraction = 0.0; // fraction with robust weight < 1
};

struct IterationRecord {
  int iteration = 0;
  double cost = 0.0;
  double gradient_norm = 0.0;
  double lambda = 0.0;
  bool accepted = true;
};

/// Per-stage outputs of the initializer, kept for diagnostics.
struct InitializerSummary {
  std::size_t pattern_count = 0;
  std::size_t accepted_pose_count = 0;
  double pnp_mean_rmse = 0.0;          // px
  double rotation_fit_rmse = 0.0;      // rad/s
  double correlation_offset = 0.0;     // s
  double correlation_peak_ratio = 0.0;
  Eigen::Matrix3d hand_eye_rotation = Eigen::Matrix3d::Identity();
  double hand_eye_time_offset = 0.0;   // s
  Eigen::Vector3d translation_initial = Eigen::Vector3d::Zero();
  Eigen::Vector3d gravity_initial = Eigen::Vector3d::Zero();
  double translation_condition = 0.0;
  double position_fit_rmse = 0.0;      // m
};

struct CalibrationReport {
  CalibParams estimate;
  InitializerSummary initializer;
  std::map<std::string, ResidualStats> residual_stats;
  std::vector<IterationRecord> trace;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string termination;
  double initialize_seconds = 0.0;
  double optimize_seconds = 0.0;
  double total_seconds = 0.0;
};

// ---------------------------------------------------------------------------
// JSON helpers for Eigen carriers
// ---------------------------------------------------------------------------

inline json to_json(const Eigen::Vector3d& v) { return json{v.x(), v.y(), v.z()}; }

inline json to_json(const Eigen::Matrix3d& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back(json{m(r, 0), m(r, 1), m(r, 2)});
  return rows;
}

inline Eigen::Vector3d vector3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw CalibError(Stage::Io, "expected 3-vector in JSON");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline Eigen::Matrix3d matrix3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw CalibError(Stage::Io, "expected 3x3 matrix in JSON");
  }
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

inline json to_json(const ImuIntrinsics& i) {
  return json{{"accel_mapping", to_json(i.accel_mapping)},
              {"gyro_mapping", to_json(i.gyro_mapping)},
              {"accel_bias", to_json(i.accel_bias)},
              {"gyro_bias", to_json(i.gyro_bias)}};
}

inline ImuIntrinsics imu_intrinsics_from_json(const json& j) {
  ImuIntrinsics i;
  i.accel_mapping = matrix3_from_json(j.at("accel_mapping"));
  i.gyro_mapping = matrix3_from_json(j.at("gyro_mapping"));
  i.accel_bias = vector3_from_json(j.at("accel_bias"));
  i.gyro_bias = vector3_from_json(j.at("gyro_bias"));
  return i;
}

inline json to_json(const CalibParams& p) {
  return json{{"extrinsic_rotation", to_json(p.extrinsic_rotation)},
              {"extrinsic_translation", to_json(p.extrinsic_translation)},
              {"time_offset", p.time_offset},
              {"imu_intrinsics", to_json(p.imu_intrinsics)},
              {"gravity_w", to_json(p.gravity_w)}};
}

inline CalibParams calib_params_from_json(const json& j) {
  CalibParams p;
  p.extrinsic_rotation = matrix3_from_json(j.at("extrinsic_rotation"));
  p.extrinsic_translation = vector3_from_json(j.at("extrinsic_translation"));
  p.time_offset = j.at("time_offset").get<double>();
  p.imu_intrinsics = imu_intrinsics_from_json(j.at("imu_intrinsics"));
  p.gravity_w = vector3_from_json(j.at("gravity_w"));
  return p;
}

inline json to_json(const CameraIntrinsics& c) {
  return json{{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy},
              {"k1", c.k1}, {"k2", c.k2}, {"p1", c.p1}, {"p2", c.p2},
              {"width", c.width}, {"height", c.height}};
}

inline CameraIntrinsics camera_intrinsics_from_json(const json& j) {
  CameraIntrinsics c;
  c.fx = j.at("fx").get<double>();
  c.fy = j.at("fy").get<double>();
  c.cx = j.at("cx").get<double>();
  c.cy = j.at("cy").get<double>();
  c.k1 = j.value("k1", 0.0);
  c.k2 = j.value("k2", 0.0);
  c.p1 = j.value("p1", 0.0);
  c.p2 = j.value("p2", 0.0);
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  return c;
}

inline json to_json(const CalibConfig& c) {
  return json{{"camera", to_json(c.camera)},
              {"rotation_knot_spacing", c.rotation_knot_spacing},
              {"position_knot_spacing", c.position_knot_spacing},
              {"gravity_magnitude", c.gravity_magnitude},
              {"sigma_gyro", c.sigma_gyro},
              {"sigma_accel", c.sigma_accel},
              {"sigma_pixel", c.sigma_pixel},
              {"time_offset_bound", c.time_offset_bound},
              {"estimate_imu_mapping", c.estimate_imu_mapping},
              {"huber_threshold", c.huber_threshold},
              {"pnp_rmse_threshold", c.pnp_rmse_threshold},
              {"max_iterations", c.max_iterations},
              {"function_tolerance", c.function_tolerance},
              {"gradient_tolerance", c.gradient_tolerance},
              {"seed", c.seed}};
}

inline CalibConfig calib_config_from_json(const json& j) {
  CalibConfig c;
  c.camera = camera_intrinsics_from_json(j.at("camera"));
  c.rotation_knot_spacing = j.value("rotation_knot_spacing", c.rotation_knot_spacing);
  c.position_knot_spacing = j.value("position_knot_spacing", c.position_knot_spacing);
  c.gravity_magnitude = j.value("gravity_magnitude", c.gravity_magnitude);
  c.sigma_gyro = j.value("sigma_gyro", c.sigma_gyro);
  c.sigma_accel = j.value("sigma_accel", c.sigma_accel);
  c.sigma_pixel = j.value("sigma_pixel", c.sigma_pixel);
  c.time_offset_bound = j.value("time_offset_bound", c.time_offset_bound);
  c.estimate_imu_mapping = j.value("estimate_imu_mapping", c.estimate_imu_mapping);
  c.huber_threshold = j.value("huber_threshold", c.huber_threshold);
  c.pnp_rmse_threshold = j.value("pnp_rmse_threshold", c.pnp_rmse_threshold);
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.function_tolerance = j.value("function_tolerance", c.function_tolerance);
  c.gradient_tolerance = j.value("gradient_tolerance", c.gradient_tolerance);
  c.seed = j.value("seed", c.seed);
  return c;
}

inline json to_json(const InitializerSummary& s) {
  return json{{"pattern_count", s.pattern_count},
              {"accepted_pose_count", s.accepted_pose_count},
              {"pnp_mean_rmse", s.pnp_mean_rmse},
              {"rotation_fit_rmse", s.rotation_fit_rmse},
              {"correlation_offset", s.correlation_offset},
              {"correlation_peak_ratio", s.correlation_peak_ratio},
              {"hand_eye_rotation", to_json(s.hand_eye_rotation)},
              {"hand_eye_time_offset", s.hand_eye_time_offset},
              {"translation_initial", to_json(s.translation_initial)},
              {"gravity_initial", to_json(s.gravity_initial)},
              {"translation_condition", s.translation_condition},
              {"position_fit_rmse", s.position_fit_rmse}};
}

inline InitializerSummary initializer_summary_from_json(const json& j) {
  InitializerSummary s;
  s.pattern_count = j.at("pattern_count").get<std::size_t>();
  s.accepted_pose_count = j.at("accepted_pose_count").get<std::size_t>();
  s.pnp_mean_rmse = j.at("pnp_mean_rmse").get<double>();
  s.rotation_fit_rmse = j.at("rotation_fit_rmse").get<double>();
  s.correlation_offset = j.at("correlation_offset").get<double>();
  s.correlation_peak_ratio = j.at("correlation_peak_ratio").get<double>();
  s.hand_eye_rotation = matrix3_from_json(j.at("hand_eye_rotation"));
  s.hand_eye_time_offset = j.at("hand_eye_time_offset").get<double>();
  s.translation_initial = vector3_from_json(j.at("translation_initial"));
  s.gravity_initial = vector3_from_json(j.at("gravity_initial"));
  s.translation_condition = j.at("translation_condition").get<double>();
  s.position_fit_rmse = j.at("position_fit_rmse").get<double>();
  return s;
}

inline json to_json(const CalibrationReport& r) {
  json stats = json::object();
  for (const auto& [name, st] : r.residual_stats) {
    stats[name] = json{{"count", st.count},
                       {"rmse", st.rmse},
                       {"downweighted_fraction", st.downweighted_fraction}};
  }
  json trace = json::array();
  for (const IterationRecord& it : r.trace) {
    trace.push_back(json{{"iteration", it.iteration},
                         {"cost", it.cost},
                         {"gradient_norm", it.gradient_norm},
                         {"lambda", it.lambda},
                         {"accepted", it.accepted}});
  }
  return json{{"calibration", to_json(r.estimate)},
              {"initializer", to_json(r.initializer)},
              {"residual_stats", stats},
              {"trace", trace},
              {"solver",
               json{{"initial_cost", r.initial_cost},
                    {"final_cost", r.final_cost},
                    {"iterations", r.iterations},
                    {"converged", r.converged},
                    {"termination", r.termination}}},
              {"timings",
               json{{"initialize_s", r.initialize_seconds},
                    {"optimize_s", r.optimize_seconds},
                    {"total_s", r.total_seconds}}}};
}

inline CalibrationReport report_from_json(const json& j) {
  CalibrationReport r;
  r.estimate = calib_params_from_json(j.at("calibration"));
  r.initializer = initializer_summary_from_json(j.at("initializer"));
  for (const auto& [name, st] : j.at("residual_stats").items()) {
    ResidualStats s;
    s.count = st.at("count").get<std::size_t>();
    s.rmse = st.at("rmse").get<double>();
    s.downweighted_fraction = st.at("downweighted_fraction").get<double>();
    r.residual_stats[name] = s;
  }
  for (const json& it : j.at("trace")) {
    IterationRecord rec;
    rec.iteration = it.at("iteration").get<int>();
    rec.cost = it.at("cost").get<double>();
    rec.gradient_norm = it.at("gradient_norm").get<double>();
    rec.lambda = it.at("lambda").get<double>();
    rec.accepted = it.at("accepted").get<bool>();
    r.trace.push_back(rec);
  }
  const json& solver = j.at("solver");
  r.initial_cost = solver.at("initial_cost").get<double>();
  r.final_cost = solver.at("final_cost").get<double>();
  r.iterations = solver.at("iterations").get<int>();
  r.converged = solver.at("converged").get<bool>();
  r.termination = solver.at("termination").get<std::string>();
  const json& timings = j.at("timings");
  r.initialize_seconds = timings.at("initialize_s").get<double>();
  r.optimize_seconds = timings.at("optimize_s").get<double>();
  r.total_seconds = timings.at("total_s").get<double>();
  return r;
}

// ---------------------------------------------------------------------------
// Loaders. These are the single validation gate: every record they return
// satisfies its type invariants.
// ---------------------------------------------------------------------------

namespace detail {

inline double parse_double(std::string_view token, const std::string& where) {
  double value = 0.0;
  const char* begin = token.data();
  const char* end = token.data() + token.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{}) {
    throw CalibError(Stage::DataLoad, where + ": malformed number '" +
                                          std::string(token) + "'");
  }
  (void)ptr;
  return value;
}

inline void warn(const std::string& msg) { std::cerr << "warning: " << msg << "\n"; }

}  // namespace detail

/// Loads grid observations from a JSON-lines file, one object per line:
///   {"t": seconds, "complete": bool, "pts": [[u, v, X, Y, Z], ...]}
/// Rows violating the pattern invariants are rejected with their line number.
inline std::vector<GridPattern> load_grid_observations(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw CalibError(Stage::DataLoad, "cannot open observations file: " + path);
  }
  std::vector<GridPattern> patterns;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    const std::string where = path + " line " + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw CalibError(Stage::DataLoad, where + ": " + e.what());
    }
    GridPattern pat;
    try {
      pat.timestamp = j.at("t").get<double>();
      pat.complete = j.at("complete").get<bool>();
      for (const json& row : j.at("pts")) {
        if (!row.is_array() || row.size() != 5) {
          throw CalibError(Stage::DataLoad, where + ": pts entries must be [u,v,X,Y,Z]");
        }
        GridPattern::Correspondence c;
        c.pixel = {row[0].get<double>(), row[1].get<double>()};
        c.board_point = {row[2].get<double>(), row[3].get<double>(),
                         row[4].get<double>()};
        pat.points.push_back(c);
      }
    } catch (const json::exception& e) {
      throw CalibError(Stage::DataLoad, where + ": " + e.what());
    }
    if (!std::isfinite(pat.timestamp)) {
      throw CalibError(Stage::DataLoad, where + ": non-finite timestamp");
    }
    if (pat.points.size() < 4) {
      throw CalibError(Stage::DataLoad, where + ": pattern below PnP minimum (4 points)");
    }
    std::set<std::pair<double, double>> seen;
    for (const auto& c : pat.points) {
      if (!c.pixel.allFinite() || !c.board_point.allFinite()) {
        throw CalibError(Stage::DataLoad, where + ": non-finite correspondence");
      }
      if (c.board_point.z() != 0.0) {
        throw CalibError(Stage::DataLoad, where + ": board point off the z=0 plane");
      }
      if (!seen.insert({c.board_point.x(), c.board_point.y()}).second) {
        throw CalibError(Stage::DataLoad, where + ": duplicate board point");
      }
    }
    patterns.push_back(std::move(pat));
  }
  std::stable_sort(patterns.begin(), patterns.end(),
                   [](const GridPattern& a, const GridPattern& b) {
                     return a.timestamp < b.timestamp;
                   });
  if (patterns.size() < 20) {
    throw CalibError(Stage::DataLoad,
                     path + ": insufficient data (" + std::to_string(patterns.size()) +
                         " patterns, need at least 20)");
  }
  return patterns;
}

/// Loads IMU measurements from a CSV file with header `t,wx,wy,wz,ax,ay,az`.
inline std::vector<ImuMeasurement> load_imu(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw CalibError(Stage::DataLoad, "cannot open IMU file: " + path);
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw CalibError(Stage::DataLoad, path + ": empty IMU file");
  }
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
  if (line != "t,wx,wy,wz,ax,ay,az") {
    throw CalibError(Stage::DataLoad,
                     path + ": bad header, expected 't,wx,wy,wz,ax,ay,az'");
  }
  std::vector<ImuMeasurement> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (line.empty()) continue;
    const std::string where = path + " line " + std::to_string(line_no);
    std::array<double, 7> v{};
    std::size_t start = 0;
    for (int k = 0; k < 7; ++k) {
      const std::size_t comma = line.find(',', start);
      const bool last = (k == 6);
      if ((comma == std::string::npos) != last) {
        throw CalibError(Stage::DataLoad, where + ": expected 7 comma-separated fields");
      }
      const std::size_t len = last ? line.size() - start : comma - start;
      v[k] = detail::parse_double(std::string_view(line).substr(start, len), where);
      start = last ? line.size() : comma + 1;
    }
    ImuMeasurement m;
    m.timestamp = v[0];
    m.gyro = {v[1], v[2], v[3]};
    m.accel = {v[4], v[5], v[6]};
    if (!std::isfinite(m.timestamp) || !m.gyro.allFinite() || !m.accel.allFinite()) {
      throw CalibError(Stage::DataLoad, where + ": non-finite value");
    }
    if (!out.empty() && m.timestamp <= out.back().timestamp) {
      throw CalibError(Stage::DataLoad, where + ": non-monotonic timestamp");
    }
    out.push_back(m);
  }
  if (out.empty()) {
    throw CalibError(Stage::DataLoad, path + ": insufficient data (no IMU rows)");
  }
  if (out.size() >= 3) {
    std::vector<double> dts(out.size() - 1);
    for (std::size_t i = 0; i + 1 < out.size(); ++i) {
      dts[i] = out[i + 1].timestamp - out[i].timestamp;
    }
    std::vector<double> sorted = dts;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double median = sorted[sorted.size() / 2];
    std::size_t jittery = 0;
    for (double dt : dts) {
      if (std::abs(dt - median) > 0.2 * median) ++jittery;
    }
    if (jittery > 0) {
      detail::warn(path + ": " + std::to_string(jittery) +
                   " sample intervals deviate more than 20% from the median (" +
                   std::to_string(median) + " s)");
    }
  }
  return out;
}

/// Writers matching the loader schemas; numbers are emitted with
/// shortest-round-trip formatting so write/load is lossless.
inline void write_grid_observations(const std::string& path,
                                    const std::vector<GridPattern>& patterns) {
  std::ofstream out(path);
  if (!out) throw CalibError(Stage::Io, "cannot write observations file: " + path);
  for (const GridPattern& p : patterns) {
    json pts = json::array();
    for (const auto& c : p.points) {
      pts.push_back(json{c.pixel.x(), c.pixel.y(), c.board_point.x(),
                         c.board_point.y(), c.board_point.z()});
    }
    out << json{{"t", p.timestamp}, {"complete", p.complete}, {"pts", pts}}.dump()
        << "\n";
  }
  if (!out.good()) throw CalibError(Stage::Io, "write failed: " + path);
}

inline void write_imu(const std::string& path,
                      const std::vector<ImuMeasurement>& measurements) {
  std::ofstream out(path);
  if (!out) throw CalibError(Stage::Io, "cannot write IMU file: " + path);
  out << "t,wx,wy,wz,ax,ay,az\n";
  char buf[32];
  const auto emit = [&](double v, char sep) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    out.write(buf, ptr - buf);
    out.put(sep);
  };
  for (const ImuMeasurement& m : measurements) {
    emit(m.timestamp, ',');
    emit(m.gyro.x(), ',');
    emit(m.gyro.y(), ',');
    emit(m.gyro.z(), ',');
    emit(m.accel.x(), ',');
    emit(m.accel.y(), ',');
    emit(m.accel.z(), '\n');
  }
  if (!out.good()) throw CalibError(Stage::Io, "write failed: " + path);
}

inline void write_report(const CalibrationReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CalibError(Stage::Io, "cannot write report: " + path);
  out << to_json(report).dump(2) << "\n";
  if (!out.good()) throw CalibError(Stage::Io, "write failed: " + path);
}

inline CalibrationReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CalibError(Stage::Io, "cannot open report: " + path);
  json j;
  try {
    in >> j;
    return report_from_json(j);
  } catch (const json::exception& e) {
    throw CalibError(Stage::Io, path + ": " + e.what());
  }
}

inline CalibConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CalibError(Stage::Config, "cannot open config: " + path);
  json j;
  try {
    in >> j;
    return calib_config_from_json(j);
  } catch (const json::exception& e) {
    throw CalibError(Stage::Config, path + ": " + e.what());
  }
}

inline void write_config(const CalibConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CalibError(Stage::Io, "cannot write config: " + path);
  out << to_json(config).dump(2) << "\n";
  if (!out.good()) throw CalibError(Stage::Io, "write failed: " + path);
}

}  // namespace splinecal
