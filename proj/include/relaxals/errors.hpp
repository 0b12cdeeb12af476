#pragma once

#include <stdexcept>
#include <string>

namespace relaxals {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SingularGauge : Error {
  using Error::Error;
};

struct RankCollapse : Error {
  using Error::Error;
};

struct SubproblemSingular : Error {
  explicit SubproblemSingular(int index, const std::string& what)
      : Error(what), first_deficient(index) {}
  int first_deficient;
};

struct NonFinite : Error {
  using Error::Error;
};

struct TooManySamples : Error {
  using Error::Error;
};

struct ZeroData : Error {
  using Error::Error;
};

struct IllConditionedShift : Error {
  using Error::Error;
};

struct FrameNotOrthonormal : Error {
  using Error::Error;
};

struct ZeroProjectedB : Error {
  using Error::Error;
};

struct DomainError : Error {
  using Error::Error;
};

struct InsufficientTrace : Error {
  using Error::Error;
};

struct NonPositiveError : Error {
  using Error::Error;
};

struct Asymmetry : Error {
  using Error::Error;
};

struct SingularN : Error {
  using Error::Error;
};

struct DegenerateSplitting : Error {
  using Error::Error;
};

struct AllUnitEigenvalues : Error {
  using Error::Error;
};

struct UnmatchedEigenvalue : Error {
  using Error::Error;
};

struct TooLarge : Error {
  using Error::Error;
};

struct NotOrthogonalized : Error {
  using Error::Error;
};

struct SolveFailure : Error {
  using Error::Error;
};

struct ZeroLocalRhs : Error {
  using Error::Error;
};

struct NotPowerOfTwo : Error {
  using Error::Error;
};

struct NoConvergence : Error {
  using Error::Error;
};

}  // namespace relaxals
