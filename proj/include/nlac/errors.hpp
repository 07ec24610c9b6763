#pragma once

#include <stdexcept>
#include <string>

namespace nlac {

/// Base class for every failure raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

// phase-field solver
struct DegenerateInterface : Error { using Error::Error; };
struct BlowUp : Error { using Error::Error; };
struct RootBracketFailure : Error { using Error::Error; };

// curves and calibrations
struct SelfIntersection : Error { using Error::Error; };
struct TubeTooThin : Error { using Error::Error; };
struct InsufficientShells : Error { using Error::Error; };

// diagnostics
struct SignIncoherence : Error { using Error::Error; };
struct NonPositiveValue : Error { using Error::Error; };

} // namespace nlac
