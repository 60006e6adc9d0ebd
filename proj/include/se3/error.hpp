#pragma once

#include <stdexcept>
#include <string>

namespace se3 {

/// Invalid argument values or shapes passed to an operation.
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Request outside the configured capability (e.g. degree above the maximum).
class CapabilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid model/run configuration; the message names the offending field.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Zero-length edge vector reached the kernel.
class DegenerateEdgeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Filesystem or stream failure; the message carries the path.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values encountered during training or evaluation.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace se3
