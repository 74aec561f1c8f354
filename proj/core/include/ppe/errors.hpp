#pragma once

#include <stdexcept>
#include <string>

namespace ppe {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class GenerationExhausted : public Error { using Error::Error; };
class NoPath : public Error { using Error::Error; };
class RegionExcludesEndpoints : public Error { using Error::Error; };
class IncompatibleArchitecture : public Error { using Error::Error; };
class ShapeMismatch : public Error { using Error::Error; };
class DivergenceDetected : public Error { using Error::Error; };
class NoPathAnywhere : public Error { using Error::Error; };
class MaskFailed : public Error { using Error::Error; };
class IoFailure : public Error { using Error::Error; };
class ChecksumMismatch : public Error { using Error::Error; };

/// Invalid user configuration. The CLI maps this to exit code 2.
class ConfigError : public Error { using Error::Error; };

}  // namespace ppe
