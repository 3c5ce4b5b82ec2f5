#include "ifield/core.hpp"

namespace ifield {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::UnknownModel: return "UnknownModel";
    case ErrorCode::ParameterOutOfRange: return "ParameterOutOfRange";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::MissingMetric: return "MissingMetric";
    case ErrorCode::EmptySampleSet: return "EmptySampleSet";
    case ErrorCode::NonInvertibleJacobian: return "NonInvertibleJacobian";
    case ErrorCode::TorBFieldVanishes: return "TorBFieldVanishes";
    case ErrorCode::DomainExit: return "DomainExit";
    case ErrorCode::NewtonDivergence: return "NewtonDivergence";
    case ErrorCode::SingularJacobian: return "SingularJacobian";
    case ErrorCode::InconsistentClassification: return "InconsistentClassification";
    case ErrorCode::DegenerateAxis: return "DegenerateAxis";
    case ErrorCode::NonClosedLoop: return "NonClosedLoop";
    case ErrorCode::MissingPotentialAndFallbackDisabled: return "MissingPotentialAndFallbackDisabled";
    case ErrorCode::LevelOutOfRange: return "LevelOutOfRange";
    case ErrorCode::ResonantSurface: return "ResonantSurface";
    case ErrorCode::SurfaceFitResidualTooLarge: return "SurfaceFitResidualTooLarge";
    case ErrorCode::MissingCurrentPotential: return "MissingCurrentPotential";
    case ErrorCode::NotMHS: return "NotMHS";
    case ErrorCode::NotUnimodular: return "NotUnimodular";
    case ErrorCode::EigenframeDiscontinuity: return "EigenframeDiscontinuity";
    case ErrorCode::HyperbolicUnsupported: return "HyperbolicUnsupported";
    case ErrorCode::NonMonotoneFlux: return "NonMonotoneFlux";
    case ErrorCode::RankLoss: return "RankLoss";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::PreconditionFailed: return "PreconditionFailed";
    case ErrorCode::EtaNotCovolume: return "EtaNotCovolume";
    case ErrorCode::EtaSurfaceCondition: return "EtaSurfaceCondition";
    case ErrorCode::SingularOmega: return "SingularOmega";
    case ErrorCode::IOError: return "IOError";
    case ErrorCode::ResidualAboveTolerance: return "ResidualAboveTolerance";
    case ErrorCode::NonvanishingPeriods: return "NonvanishingPeriods";
    case ErrorCode::FlowEscape: return "FlowEscape";
    case ErrorCode::RLambdaNonpositive: return "RLambdaNonpositive";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

ErrorKind kind_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::SchemaError:
    case ErrorCode::UnknownModel:
    case ErrorCode::ParameterOutOfRange:
    case ErrorCode::InvalidParameter:
    case ErrorCode::MissingMetric:
    case ErrorCode::EmptySampleSet:
      return ErrorKind::Config;
    case ErrorCode::NonvanishingPeriods:
    case ErrorCode::FlowEscape:
    case ErrorCode::RLambdaNonpositive:
    case ErrorCode::InvariantViolation:
      return ErrorKind::Invariant;
    default:
      return ErrorKind::Numerical;
  }
}

}  // namespace ifield
