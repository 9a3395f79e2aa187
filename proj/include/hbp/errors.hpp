#pragma once

#include <stdexcept>
#include <string>

namespace hbp {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Operand shapes do not satisfy an operation's precondition.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Non-finite values, failed numerical checks, diverged optimization.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

// File format violations and filesystem failures.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// Bad keys or values in a config file or on the command line.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// A tape or registry was asked for an operation it does not know.
class UnsupportedOpError : public Error {
public:
    explicit UnsupportedOpError(const std::string& msg) : Error(msg) {}
};

} // namespace hbp
