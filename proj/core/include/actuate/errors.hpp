#pragma once

#include <stdexcept>
#include <string>

namespace actuate {

// Error taxonomy mirrors the CLI exit codes: config/validation problems,
// missing input artifacts, and numerical failures are distinct outcomes.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct MissingArtifactError : std::runtime_error {
    explicit MissingArtifactError(const std::string& what) : std::runtime_error(what) {}
};

struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace actuate
