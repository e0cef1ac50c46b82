// Command-line front end: simulate -> calibrate -> evaluate workflows.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "splinecal/splinecal.hpp"

namespace {

using namespace splinecal;

constexpr int kExitUsage = 2;
constexpr int kExitDataLoad = 3;
constexpr int kExitObservability = 4;
constexpr int kExitSolver = 5;
constexpr int kExitIo = 6;

int exit_code_for(Stage stage) {
  switch (stage) {
    case Stage::Config: return kExitUsage;
    case Stage::DataLoad: return kExitDataLoad;
    case Stage::Pnp:
    case Stage::RotationFit:
    case Stage::Correlation:
    case Stage::HandEye:
    case Stage::Alignment:
    case Stage::TranslationGravity:
    case Stage::PositionFit: return kExitObservability;
    case Stage::Optimize: return kExitSolver;
    case Stage::Simulate: return kExitUsage;
    case Stage::Io: return kExitIo;
  }
  return 1;
}

void print_failure(Stage stage, const std::string& message) {
  std::cerr << json{{"error", {{"stage", stage_name(stage)}, {"message", message}}}}.dump()
            << "\n";
}

/// Applies `key=value` overrides with dotted-path keys to a JSON document.
void apply_override(json& doc, const std::string& entry) {
  const std::size_t eq = entry.find('=');
  if (eq == std::string::npos) {
    throw CalibError(Stage::Config, "override must be key=value: " + entry);
  }
  const std::string key = entry.substr(0, eq);
  const std::string value = entry.substr(eq + 1);
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos
                                                   ? std::string::npos
                                                   : dot - start);
    if (part.empty()) throw CalibError(Stage::Config, "bad override key: " + key);
    if (dot == std::string::npos) {
      json parsed;
      try {
        parsed = json::parse(value);
      } catch (const json::exception&) {
        parsed = value;  // plain string
      }
      (*node)[part] = parsed;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

json load_json_file(const std::string& path, Stage stage) {
  std::ifstream in(path);
  if (!in) throw CalibError(stage, "cannot open " + path);
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw CalibError(stage, path + ": " + e.what());
  }
}

void write_trace_csv(const CalibrationReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CalibError(Stage::Io, "cannot write " + path);
  out << std::setprecision(17);
  out << "iteration,cost,gradient_norm\n";
  for (const IterationRecord& it : report.trace) {
    out << it.iteration << "," << it.cost << "," << it.gradient_norm << "\n";
  }
  if (!out.good()) throw CalibError(Stage::Io, "write failed: " + path);
}

void write_residuals_csv(const FullState& state,
                         const std::vector<GridPattern>& patterns,
                         const std::vector<ImuMeasurement>& imu,
                         const CameraIntrinsics& intr, const SolverOptions& opts,
                         const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CalibError(Stage::Io, "cannot write " + path);
  out << "factor_type,time,norm\n";
  for (const GridPattern& p : patterns) {
    for (const auto& corr : p.points) {
      try {
        const Eigen::Vector2d r = reprojection_residual(state, intr, p.timestamp, corr);
        out << "reprojection," << p.timestamp << "," << r.norm() / opts.sigma_pixel
            << "\n";
      } catch (const std::exception&) {
        // out-of-domain or behind camera: skipped, matching the optimizer
      }
    }
  }
  for (const ImuMeasurement& m : imu) {
    try {
      out << "gyroscope," << m.timestamp << ","
          << gyroscope_residual(state, m).norm() / opts.sigma_gyro << "\n";
    } catch (const std::exception&) {
    }
    try {
      out << "accelerometer," << m.timestamp << ","
          << accelerometer_residual(state, m).norm() / opts.sigma_accel << "\n";
    } catch (const std::exception&) {
    }
  }
  if (!out.good()) throw CalibError(Stage::Io, "write failed: " + path);
}

void print_report_summary(const CalibrationReport& report) {
  constexpr double rad2deg = 180.0 / M_PI;
  const Eigen::Vector3d euler =
      euler_zyx_from_rotation(report.estimate.extrinsic_rotation) * rad2deg;
  const Eigen::Vector3d t = report.estimate.extrinsic_translation;
  std::printf("extrinsic rotation (roll/pitch/yaw deg): %9.4f %9.4f %9.4f\n",
              euler.x(), euler.y(), euler.z());
  std::printf("extrinsic translation (cm):              %9.4f %9.4f %9.4f\n",
              100.0 * t.x(), 100.0 * t.y(), 100.0 * t.z());
  std::printf("time offset (ms):                        %9.4f\n",
              1000.0 * report.estimate.time_offset);
  const Eigen::Vector3d g = report.estimate.gravity_w;
  std::printf("gravity (m/s^2):                         %9.4f %9.4f %9.4f\n", g.x(),
              g.y(), g.z());
  std::printf("cost: %.6e -> %.6e in %d iterations (%s)\n", report.initial_cost,
              report.final_cost, report.iterations, report.termination.c_str());
}

int run_calibrate(const std::string& obs_path, const std::string& imu_path,
                  const std::string& config_path, const std::string& out_dir,
                  const std::vector<std::string>& overrides, std::uint64_t seed,
                  bool seed_set) {
  json config_json = load_json_file(config_path, Stage::Config);
  for (const std::string& o : overrides) apply_override(config_json, o);
  CalibConfig config = calib_config_from_json(config_json);
  if (seed_set) config.seed = seed;
  config.validate();

  std::filesystem::create_directories(out_dir);

  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<GridPattern> patterns = load_grid_observations(obs_path);
  const std::vector<ImuMeasurement> imu = load_imu(imu_path);

  const InitializerState init = initialize(patterns, imu, config);
  const auto t1 = std::chrono::steady_clock::now();

  const SolverOptions opts = SolverOptions::from_config(config);
  auto [state, report] = batch_optimize(init, patterns, imu, config.camera, opts);
  const auto t2 = std::chrono::steady_clock::now();
  report.initialize_seconds = std::chrono::duration<double>(t1 - t0).count();
  report.optimize_seconds = std::chrono::duration<double>(t2 - t1).count();
  report.total_seconds = std::chrono::duration<double>(t2 - t0).count();

  write_report(report, out_dir + "/report.json");
  write_trace_csv(report, out_dir + "/trace.csv");
  write_residuals_csv(state, patterns, imu, config.camera, opts,
                      out_dir + "/residuals.csv");
  print_report_summary(report);
  if (!report.converged) {
    print_failure(Stage::Optimize, "solver did not converge (" + report.termination + ")");
    return kExitSolver;
  }
  return 0;
}

int run_simulate(const std::string& spec_path, const std::string& out_dir,
                 const std::vector<std::string>& overrides, std::uint64_t seed,
                 bool seed_set) {
  SimSpec spec;
  if (!spec_path.empty()) {
    json spec_json = load_json_file(spec_path, Stage::Config);
    for (const std::string& o : overrides) apply_override(spec_json, o);
    spec = sim_spec_from_json(spec_json);
  } else {
    json spec_json = to_json(SimSpec{});
    for (const std::string& o : overrides) apply_override(spec_json, o);
    spec = sim_spec_from_json(spec_json);
  }
  if (seed_set) spec.seed = seed;
  spec.validate();
  std::filesystem::create_directories(out_dir);
  const DatasetPaths paths = write_dataset(spec, out_dir);
  std::printf("wrote %s\n", paths.observations.c_str());
  std::printf("wrote %s\n", paths.imu.c_str());
  std::printf("wrote %s\n", paths.truth.c_str());
  std::printf("wrote %s\n", paths.config.c_str());
  return 0;
}

int run_evaluate(const std::vector<std::string>& report_paths,
                 const std::string& truth_path) {
  const TruthFile truth = load_truth(truth_path);
  std::vector<CalibDelta> deltas;
  std::vector<Eigen::Vector3d> eulers;
  std::vector<Eigen::Vector3d> translations;
  std::vector<double> offsets;
  for (const std::string& path : report_paths) {
    const CalibrationReport report = load_report(path);
    deltas.push_back(compare_calibrations(report.estimate, truth.calib));
    eulers.push_back(euler_zyx_from_rotation(report.estimate.extrinsic_rotation) *
                     (180.0 / M_PI));
    translations.push_back(report.estimate.extrinsic_translation * 100.0);
    offsets.push_back(report.estimate.time_offset * 1000.0);
  }

  std::printf("%-28s %12s %12s %12s\n", "metric", "mean", "std", "|error|");
  const auto stats = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var = v.size() > 1 ? var / static_cast<double>(v.size() - 1) : 0.0;
    return std::pair<double, double>(mean, std::sqrt(var));
  };
  const char* euler_names[3] = {"roll (deg)", "pitch (deg)", "yaw (deg)"};
  const char* trans_names[3] = {"translation x (cm)", "translation y (cm)",
                                "translation z (cm)"};
  for (int axis = 0; axis < 3; ++axis) {
    std::vector<double> values, errors;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
      values.push_back(eulers[i][axis]);
      errors.push_back(std::abs(deltas[i].euler_delta_deg[axis]));
    }
    const auto [mean, sd] = stats(values);
    const auto [emean, esd] = stats(errors);
    std::printf("%-28s %12.6f %12.6f %12.6f\n", euler_names[axis], mean, sd, emean);
  }
  for (int axis = 0; axis < 3; ++axis) {
    std::vector<double> values, errors;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
      values.push_back(translations[i][axis]);
      errors.push_back(std::abs(deltas[i].translation_delta_cm[axis]));
    }
    const auto [mean, sd] = stats(values);
    const auto [emean, esd] = stats(errors);
    std::printf("%-28s %12.6f %12.6f %12.6f\n", trans_names[axis], mean, sd, emean);
  }
  {
    std::vector<double> errors;
    for (const CalibDelta& d : deltas) errors.push_back(std::abs(d.offset_delta_ms));
    const auto [mean, sd] = stats(offsets);
    const auto [emean, esd] = stats(errors);
    std::printf("%-28s %12.6f %12.6f %12.6f\n", "time offset (ms)", mean, sd, emean);
  }
  {
    std::vector<double> gravity;
    for (const CalibDelta& d : deltas) gravity.push_back(d.gravity_angle_deg);
    const auto [mean, sd] = stats(gravity);
    std::printf("%-28s %12.6f %12.6f %12.6f\n", "gravity direction (deg)", mean, sd,
                mean);
  }
  return 0;
}

int run_selftest(const std::string& scratch_dir) {
  std::filesystem::create_directories(scratch_dir);
  SimSpec spec;
  spec.duration = 10.0;
  spec.imu_rate = 200.0;
  spec.obs_rate = 30.0;
  spec.seed = 7;
  const DatasetPaths paths = write_dataset(spec, scratch_dir);

  const std::vector<GridPattern> patterns = load_grid_observations(paths.observations);
  const std::vector<ImuMeasurement> imu = load_imu(paths.imu);
  const CalibConfig config = load_config(paths.config);
  const InitializerState init = initialize(patterns, imu, config);
  auto [state, report] =
      batch_optimize(init, patterns, imu, config.camera, SolverOptions::from_config(config));
  const TruthFile truth = load_truth(paths.truth);
  const CalibDelta delta = compare_calibrations(report.estimate, truth.calib);

  bool ok = true;
  const auto check = [&](const char* name, double value, double tol) {
    const bool pass = std::abs(value) <= tol;
    std::printf("%-32s %12.3e (tol %8.1e) %s\n", name, value, tol,
                pass ? "PASS" : "FAIL");
    ok = ok && pass;
  };
  check("rotation error (deg)", delta.rotation_angle_deg, 5e-3);
  check("translation error (cm)", delta.translation_norm_cm, 5e-2);
  check("time offset error (ms)", delta.offset_delta_ms, 5e-3);
  check("gravity direction error (deg)", delta.gravity_angle_deg, 5e-3);
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continuous-time camera-IMU spatiotemporal calibrator"};
  app.require_subcommand(1);

  std::string obs_path, imu_path, config_path, out_dir = ".";
  std::string spec_path, truth_path;
  std::vector<std::string> overrides;
  std::vector<std::string> report_paths;
  std::uint64_t seed = 0;
  bool seed_set = false;

  CLI::App* calibrate = app.add_subcommand("calibrate", "run the full calibration pipeline");
  calibrate->add_option("--observations", obs_path, "grid observations (JSONL)")->required();
  calibrate->add_option("--imu", imu_path, "IMU measurements (CSV)")->required();
  calibrate->add_option("--config", config_path, "calibration config (JSON)")->required();
  calibrate->add_option("--out", out_dir, "output directory");
  calibrate->add_option("--override", overrides, "config override key=value (dotted path)");
  calibrate->add_option("--seed", seed, "random seed override")
      ->each([&](const std::string&) { seed_set = true; });

  CLI::App* simulate = app.add_subcommand("simulate", "generate a synthetic dataset");
  simulate->add_option("--spec", spec_path, "simulation spec (JSON); defaults used if omitted");
  simulate->add_option("--out", out_dir, "output directory");
  simulate->add_option("--override", overrides, "spec override key=value (dotted path)");
  simulate->add_option("--seed", seed, "random seed override")
      ->each([&](const std::string&) { seed_set = true; });

  CLI::App* evaluate = app.add_subcommand("evaluate", "compare reports against ground truth");
  evaluate->add_option("reports", report_paths, "report JSON files")->required();
  evaluate->add_option("--truth", truth_path, "ground truth JSON")->required();

  CLI::App* selftest = app.add_subcommand("selftest", "quick end-to-end smoke test");
  selftest->add_option("--out", out_dir, "scratch directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? kExitUsage : 0;
  }

  try {
    if (calibrate->parsed()) {
      return run_calibrate(obs_path, imu_path, config_path, out_dir, overrides, seed,
                           seed_set);
    }
    if (simulate->parsed()) {
      return run_simulate(spec_path, out_dir, overrides, seed, seed_set);
    }
    if (evaluate->parsed()) {
      return run_evaluate(report_paths, truth_path);
    }
    if (selftest->parsed()) {
      return run_selftest(out_dir.empty() || out_dir == "." ? "selftest_out" : out_dir);
    }
  } catch (const CalibError& e) {
    print_failure(e.stage(), e.what());
    return exit_code_for(e.stage());
  } catch (const std::exception& e) {
    print_failure(Stage::Io, e.what());
    return 1;
  }
  return kExitUsage;
}
