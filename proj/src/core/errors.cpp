#include "qig/errors.hpp"

namespace qig {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NotHermitian: return "NotHermitian";
    case ErrorCode::NotPositive: return "NotPositive";
    case ErrorCode::TraceMismatch: return "TraceMismatch";
    case ErrorCode::NotTracePreserving: return "NotTracePreserving";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::BadFactorization: return "BadFactorization";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::NotPure: return "NotPure";
    case ErrorCode::NonDifferentiablePoint: return "NonDifferentiablePoint";
    case ErrorCode::NotFaithful: return "NotFaithful";
    case ErrorCode::NumericalBreakdown: return "NumericalBreakdown";
    case ErrorCode::NonSmoothDistance: return "NonSmoothDistance";
    case ErrorCode::DependentObservables: return "DependentObservables";
    case ErrorCode::NewtonDivergence: return "NewtonDivergence";
    case ErrorCode::BlowUp: return "BlowUp";
    case ErrorCode::NotRepresented: return "NotRepresented";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::StepRejected: return "StepRejected";
    case ErrorCode::SingularControlBlock: return "SingularControlBlock";
    case ErrorCode::ConstraintSolveFailure: return "ConstraintSolveFailure";
    case ErrorCode::ZeroCoefficient: return "ZeroCoefficient";
    case ErrorCode::BadTimes: return "BadTimes";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::ZeroOverlap: return "ZeroOverlap";
    case ErrorCode::QuadratureTooCoarse: return "QuadratureTooCoarse";
    case ErrorCode::BranchDomain: return "BranchDomain";
    case ErrorCode::InvalidPerturbedState: return "InvalidPerturbedState";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace qig
