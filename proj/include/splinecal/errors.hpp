#pragma once

#include <stdexcept>
#include <string>

namespace splinecal {

/// Pipeline stage attached to every error; drives CLI exit codes and the
/// machine-readable failure output.
enum class Stage {
  Config,
  DataLoad,
  Pnp,
  RotationFit,
  Correlation,
  HandEye,
  Alignment,
  TranslationGravity,
  PositionFit,
  Optimize,
  Simulate,
  Io,
};

inline const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Config: return "config";
    case Stage::DataLoad: return "data_load";
    case Stage::Pnp: return "pnp";
    case Stage::RotationFit: return "rotation_fit";
    case Stage::Correlation: return "correlation";
    case Stage::HandEye: return "hand_eye";
    case Stage::Alignment: return "alignment";
    case Stage::TranslationGravity: return "translation_gravity";
    case Stage::PositionFit: return "position_fit";
    case Stage::Optimize: return "optimize";
    case Stage::Simulate: return "simulate";
    case Stage::Io: return "io";
  }
  return "unknown";
}

class CalibError : public std::runtime_error {
 public:
  CalibError(Stage stage, const std::string& msg)
      : std::runtime_error(std::string(stage_name(stage)) + ": " + msg),
        stage_(stage) {}

  Stage stage() const { return stage_; }

 private:
  Stage stage_;
};

/// Thrown when a spline is queried outside its valid half-open domain.
class SplineDomainError : public std::out_of_range {
 public:
  SplineDomainError(double tau, double lo, double hi)
      : std::out_of_range("time " + std::to_string(tau) +
                          " outside spline domain [" + std::to_string(lo) +
                          ", " + std::to_string(hi) + ")"),
        tau(tau), lo(lo), hi(hi) {}

  double tau;
  double lo;
  double hi;
};

/// Thrown when a point with non-positive depth is projected.
class CheiralityError : public std::domain_error {
 public:
  explicit CheiralityError(double z)
      : std::domain_error("point behind camera (z = " + std::to_string(z) + ")") {}
};

}  // namespace splinecal
