#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pmn {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not line up for an operation.
class DimensionError : public Error {
public:
    using Error::Error;
};

class IndexError : public Error {
public:
    using Error::Error;
};

/// Misuse of an API, e.g. calling backward on a non-scalar.
class ContractError : public Error {
public:
    using Error::Error;
};

class EncodingError : public Error {
public:
    EncodingError(const std::string& what, std::size_t position)
        : Error(what), position_(position) {}
    std::size_t position() const { return position_; }

private:
    std::size_t position_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed line in an input file; line numbers are 1-based.
class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class NonFiniteError : public Error {
public:
    using Error::Error;
};

class GenerationError : public Error {
public:
    using Error::Error;
};

class CheckpointError : public Error {
public:
    enum class Kind { io, bad_magic, version_mismatch, truncated, checksum, malformed };

    CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

}  // namespace pmn
