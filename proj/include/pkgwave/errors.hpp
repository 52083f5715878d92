#pragma once

#include <stdexcept>
#include <string>

namespace pkgwave {

// Error taxonomy used across the toolkit. All inherit std::runtime_error so
// callers that don't care about the category can catch a single type; the CLI
// maps each category to a machine-readable error record.

struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg)
        : std::runtime_error("validation error: " + msg) {}
};

struct SizingError : std::runtime_error {
    explicit SizingError(const std::string& msg)
        : std::runtime_error("sizing error: " + msg) {}
};

struct InstabilityError : std::runtime_error {
    long step = -1;
    explicit InstabilityError(const std::string& msg, long step_index)
        : std::runtime_error("instability error: " + msg), step(step_index) {}
};

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg)
        : std::runtime_error("parse error: " + msg) {}
};

struct SingularityError : std::runtime_error {
    explicit SingularityError(const std::string& msg)
        : std::runtime_error("singularity error: " + msg) {}
};

struct BandError : std::runtime_error {
    explicit BandError(const std::string& msg)
        : std::runtime_error("band error: " + msg) {}
};

struct DegenerateFitError : std::runtime_error {
    explicit DegenerateFitError(const std::string& msg)
        : std::runtime_error("degenerate fit: " + msg) {}
};

struct SweepError : std::runtime_error {
    explicit SweepError(const std::string& msg)
        : std::runtime_error("sweep error: " + msg) {}
};

} // namespace pkgwave
