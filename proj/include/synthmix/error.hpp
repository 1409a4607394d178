#pragma once

#include <stdexcept>
#include <string>

namespace synthmix {

/// Base for every error the library raises.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed input file: missing or mistyped field.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// A structural rule of a domain type does not hold.
class InvariantError : public Error {
public:
    using Error::Error;
};

/// A documented precondition of an operation was not met by the caller.
class PreconditionError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Generation output with zero usable texts. Keeps the raw payload for logging.
class GenerationParseError : public Error {
public:
    GenerationParseError(const std::string& what, std::string raw)
        : Error(what), raw_(std::move(raw)) {}
    const std::string& raw() const noexcept { return raw_; }

private:
    std::string raw_;
};

class ClassificationParseError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

} // namespace synthmix
