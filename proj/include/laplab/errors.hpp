#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace laplab
{
    struct Error : std::runtime_error
    {
        using std::runtime_error::runtime_error;
    };

    // Input network or configuration fails validation. Carries every violation.
    struct ValidationError : Error
    {
        explicit ValidationError(std::vector<std::string> violations);
        std::vector<std::string> violations;
    };

    struct InfeasibleError : Error { using Error::Error; };
    struct DegenerateOptimumError : Error { using Error::Error; };
    struct Assumption3Error : Error { using Error::Error; };
    struct ZeroRateError : Error { using Error::Error; };
    struct StateSpaceTooLargeError : Error { using Error::Error; };
    struct InsufficientDataError : Error { using Error::Error; };
    struct InvalidStateError : Error { using Error::Error; };
    struct StepUnderflowError : Error { using Error::Error; };
    struct HorizonExceededError : Error { using Error::Error; };
    struct NonDecayingSpectrumError : Error { using Error::Error; };
    struct UnsupportedExperimentError : Error { using Error::Error; };
    struct DegenerateRegressionError : Error { using Error::Error; };
}
