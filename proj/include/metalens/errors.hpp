#pragma once

#include <stdexcept>
#include <string>

namespace metalens {

// Base class for all domain errors raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define METALENS_DEFINE_ERROR(Name)   \
  struct Name : Error {               \
    using Error::Error;               \
  }

// geometry
METALENS_DEFINE_ERROR(AllZeroDensity);
METALENS_DEFINE_ERROR(NegativeDensity);
METALENS_DEFINE_ERROR(InvalidSource);
METALENS_DEFINE_ERROR(NoIntersection);
METALENS_DEFINE_ERROR(MultipleIntersections);

// cost
METALENS_DEFINE_ERROR(SingularUpdate);
METALENS_DEFINE_ERROR(SingularA);

// ot
METALENS_DEFINE_ERROR(SizeExceeded);
METALENS_DEFINE_ERROR(DiffuseRow);

struct NotConverged : Error {
  NotConverged(const std::string& what, double marginal_error_)
      : Error(what), marginal_error(marginal_error_) {}
  double marginal_error;
};

// phase
METALENS_DEFINE_ERROR(NonInjectiveTargetSampling);
METALENS_DEFINE_ERROR(SolverDiverged);

// optics
METALENS_DEFINE_ERROR(Evanescent);
METALENS_DEFINE_ERROR(NonTangentialPhase);
METALENS_DEFINE_ERROR(NoRealRoot);
METALENS_DEFINE_ERROR(MissedSurface);
METALENS_DEFINE_ERROR(ExcessiveLoss);
METALENS_DEFINE_ERROR(GridMismatch);

// conditions
METALENS_DEFINE_ERROR(InvalidAlpha);
METALENS_DEFINE_ERROR(InvalidAlphas);

// cli / config
METALENS_DEFINE_ERROR(ConfigError);

#undef METALENS_DEFINE_ERROR

}  // namespace metalens
