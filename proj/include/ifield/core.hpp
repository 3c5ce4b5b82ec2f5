#pragma once

#include <Eigen/Dense>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ifield {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// A point of the solid torus D x S^1 in the chart (x, y, phi). phi is not
// reduced; all fields are 2*pi periodic in phi.
struct Point {
  double x = 0.0;
  double y = 0.0;
  double phi = 0.0;

  Vec3 vec() const { return {x, y, phi}; }
  static Point from(const Vec3& v) { return {v[0], v[1], v[2]}; }
};

enum class ErrorCode {
  // configuration (exit 2)
  SchemaError,
  UnknownModel,
  ParameterOutOfRange,
  InvalidParameter,
  MissingMetric,
  EmptySampleSet,
  // numerical (exit 3)
  NonInvertibleJacobian,
  TorBFieldVanishes,
  DomainExit,
  NewtonDivergence,
  SingularJacobian,
  InconsistentClassification,
  DegenerateAxis,
  NonClosedLoop,
  MissingPotentialAndFallbackDisabled,
  LevelOutOfRange,
  ResonantSurface,
  SurfaceFitResidualTooLarge,
  MissingCurrentPotential,
  NotMHS,
  NotUnimodular,
  EigenframeDiscontinuity,
  HyperbolicUnsupported,
  NonMonotoneFlux,
  RankLoss,
  SingularSystem,
  PreconditionFailed,
  EtaNotCovolume,
  ResidualAboveTolerance,
  EtaSurfaceCondition,
  SingularOmega,
  IOError,
  // invariant violations (exit 4)
  NonvanishingPeriods,
  FlowEscape,
  RLambdaNonpositive,
  InvariantViolation,
};

enum class ErrorKind { Config, Numerical, Invariant };

const char* to_string(ErrorCode code);
ErrorKind kind_of(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string module, const std::string& message, std::string context = {})
      : std::runtime_error(message), code_(code), module_(std::move(module)), context_(std::move(context)) {}

  ErrorCode code() const { return code_; }
  ErrorKind kind() const { return kind_of(code_); }
  const std::string& module() const { return module_; }
  const std::string& context() const { return context_; }

 private:
  ErrorCode code_;
  std::string module_;
  std::string context_;
};

}  // namespace ifield
