#pragma once

#include <stdexcept>
#include <string>

namespace consist {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameters (k out of range, malformed schedule, unknown column...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A cell could not be parsed; the message carries the location.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Input has the wrong shape (ragged rows, wrong column count, empty table).
class StructuralError : public Error {
public:
    using Error::Error;
};

/// A function was called with arguments that violate its contract.
class UsageError : public Error {
public:
    using Error::Error;
};

/// A metric is undefined for the given labels (e.g. a single class).
class EvaluationError : public Error {
public:
    using Error::Error;
};

/// The requested computation exceeds a configured size cap.
class CapacityError : public Error {
public:
    using Error::Error;
};

}  // namespace consist
