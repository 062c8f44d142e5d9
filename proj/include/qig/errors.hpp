#pragma once

#include <stdexcept>
#include <string>

namespace qig {

enum class ErrorCode {
  InvalidArgument,
  NotHermitian,
  NotPositive,
  TraceMismatch,
  NotTracePreserving,
  DimensionMismatch,
  BadFactorization,
  DomainError,
  NotPure,
  NonDifferentiablePoint,
  NotFaithful,
  NumericalBreakdown,
  NonSmoothDistance,
  DependentObservables,
  NewtonDivergence,
  BlowUp,
  NotRepresented,
  Infeasible,
  NonConvergence,
  StepRejected,
  SingularControlBlock,
  ConstraintSolveFailure,
  ZeroCoefficient,
  BadTimes,
  GridMismatch,
  ZeroOverlap,
  QuadratureTooCoarse,
  BranchDomain,
  InvalidPerturbedState,
  ConfigInvalid,
  IoError,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace qig
