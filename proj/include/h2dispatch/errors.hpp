#pragma once

#include <stdexcept>
#include <string>

namespace h2d {

// Invalid configuration, calibration data or parameter value.
// The CLI maps this (and IoError) to exit code 2.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Missing, unreadable or malformed input/output file.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace h2d
