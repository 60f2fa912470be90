#pragma once

#include <stdexcept>
#include <string>

namespace sembprobe {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shapes or lengths that do not line up.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration value (rates, caps, bounds).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Value outside the accepted domain (ids, lengths, class labels).
class RangeError : public Error {
public:
    using Error::Error;
};

/// Malformed input file.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Statistic undefined for the given input (zero variance, constant ranks).
class DegenerateError : public Error {
public:
    using Error::Error;
};

/// Training diverged or produced a non-finite value.
class NumericError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace sembprobe
