#pragma once

#include <stdexcept>
#include <string>

namespace ad2 {

// Base for every error this library throws. The CLI maps ConfigError to
// exit code 2 and everything else to 3.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ArgumentError : public Error {
public:
    explicit ArgumentError(const std::string& msg) : Error(msg) {}
};

class ShapeError : public ArgumentError {
public:
    explicit ShapeError(const std::string& msg) : ArgumentError(msg) {}
};

class DecodeError : public Error {
public:
    explicit DecodeError(const std::string& msg) : Error(msg) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

}  // namespace ad2
