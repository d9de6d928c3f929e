#pragma once

#include <stdexcept>
#include <string>

namespace mogphmm {

// Base of every error thrown by the library. The CLI maps the subclasses onto
// process exit codes (data → 2, configuration → 3).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid parameter values or malformed rule/config objects.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Input data violates a precondition (empty, out of range, malformed rows).
class DataError : public Error {
public:
    using Error::Error;
};

// A model and the data it is applied to disagree on shape.
class StructuralError : public Error {
public:
    using Error::Error;
};

// Rejection sampling could not produce an admissible draw.
class SamplingError : public Error {
public:
    using Error::Error;
};

} // namespace mogphmm
