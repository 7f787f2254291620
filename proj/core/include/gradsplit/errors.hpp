#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gradsplit {

// Base of the library's error family. Catch this to handle anything we throw.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what_arg) : std::runtime_error(what_arg) {}
};

// Tensor shapes do not line up; messages name both shapes.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Invalid configuration values (widths, counts, thresholds, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed file contents (wrong magic, truncated record, ...).
class FormatError : public Error {
public:
    using Error::Error;
};

// Data values out of their documented range (e.g. a label byte >= class count).
class DataError : public Error {
public:
    using Error::Error;
};

// Operation called in the wrong state (e.g. reading gradients before backward).
class StateError : public Error {
public:
    using Error::Error;
};

// A documented precondition was broken by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

// Singular or ill-conditioned matrix where an invertible one is required.
class SingularityError : public Error {
public:
    using Error::Error;
};

// Filesystem failures.
class IoError : public Error {
public:
    using Error::Error;
};

// Training loss became non-finite. Carries the last epoch that completed
// with finite metrics (0 if the first epoch never finished).
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what_arg, std::int64_t last_good)
        : Error(what_arg), last_good_epoch(last_good) {}
    std::int64_t last_good_epoch;
};

}  // namespace gradsplit
