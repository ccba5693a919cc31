#pragma once

#include <stdexcept>
#include <string>

namespace sevo {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define SEVO_DECLARE_ERROR(Name)                      \
    class Name : public Error {                       \
    public:                                           \
        explicit Name(const std::string& what)        \
            : Error(std::string(#Name) + ": " + what) \
        {}                                            \
    }

SEVO_DECLARE_ERROR(PreconditionViolation);
SEVO_DECLARE_ERROR(ShapeMismatch);
SEVO_DECLARE_ERROR(InvalidCovariance);
SEVO_DECLARE_ERROR(InvalidRate);
SEVO_DECLARE_ERROR(DegenerateIntegrand);
SEVO_DECLARE_ERROR(InvalidGrid);
SEVO_DECLARE_ERROR(InvalidCoefficient);
SEVO_DECLARE_ERROR(InvalidMask);
SEVO_DECLARE_ERROR(StepSolveFailure);
SEVO_DECLARE_ERROR(NuSearchExhausted);
SEVO_DECLARE_ERROR(ConfigError);

#undef SEVO_DECLARE_ERROR

}  // namespace sevo
