#ifndef INFOUT_ERRORS_HPP
#define INFOUT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace infout {

// Base of every error thrown by the library. The CLI maps the concrete
// types onto exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

// Root finder given an interval without a sign change.
class BracketError : public Error {
public:
    using Error::Error;
};

// Latency or accuracy constraints admit no operating point.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

// Exact enumeration would exceed its atom budget.
class CapacityError : public Error {
public:
    using Error::Error;
};

// Missing lookup-table key.
class LookupError : public Error {
public:
    using Error::Error;
};

// Quantity undefined for a degenerate (zero-variance) distribution.
class DegenerateError : public Error {
public:
    using Error::Error;
};

// Classification attempted on an empty received feature set.
class ClassificationError : public Error {
public:
    using Error::Error;
};

// Malformed model / scenario / table input.
class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace infout

#endif
