#pragma once

#include <stdexcept>
#include <string>

namespace rrt {

// Argument outside the mathematical domain of an operation (t < 0, x > S, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Value outside what a tabulated / bounded object can attain.
class RangeError : public std::range_error {
public:
    using std::range_error::range_error;
};

// Malformed model or experiment configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A required constant estimate was not supplied.
class MissingConstantError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical procedure could not satisfy its contract.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace rrt
