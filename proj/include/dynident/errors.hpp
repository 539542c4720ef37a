#pragma once

#include <stdexcept>
#include <string>

namespace dynident {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// inertia matrix determinant below the configured floor
struct SingularInertia : Error {
  using Error::Error;
};

// adaptive step size underflow or non-finite state
struct IntegrationFailure : Error {
  using Error::Error;
};

// effective inertia of an iterate is not strictly positive
struct NonPositiveInertia : Error {
  using Error::Error;
};

struct RecordTooShort : Error {
  using Error::Error;
};

struct SeriesTooShort : Error {
  using Error::Error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

// observation matrix unusable for least squares (unexciting trajectory)
struct RankDeficient : Error {
  using Error::Error;
};

// output-error regression residual kept increasing
struct NonConvergence : Error {
  using Error::Error;
};

struct ConfigInvalid : Error {
  using Error::Error;
};

} // namespace dynident
