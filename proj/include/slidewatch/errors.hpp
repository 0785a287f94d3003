#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace slidewatch {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input document. Carries the byte offset of the failure.
class ParseError : public Error {
public:
    ParseError(const std::string& msg, std::size_t byte_offset)
        : Error(msg + " (byte " + std::to_string(byte_offset) + ")"),
          byte_offset_(byte_offset) {}

    std::size_t byte_offset() const { return byte_offset_; }

private:
    std::size_t byte_offset_;
};

/// Structurally valid document that violates the expected schema.
class SchemaError : public Error {
public:
    SchemaError(const std::string& msg, std::string field)
        : Error(msg + " (field '" + field + "')"), field_(std::move(field)) {}

    const std::string& field() const { return field_; }

private:
    std::string field_;
};

/// Vector operands of different dimensionality.
class DimensionMismatch : public Error {
public:
    DimensionMismatch(std::size_t lhs, std::size_t rhs)
        : Error("dimension mismatch: " + std::to_string(lhs) + " vs " + std::to_string(rhs)),
          lhs_(lhs), rhs_(rhs) {}

    std::size_t lhs() const { return lhs_; }
    std::size_t rhs() const { return rhs_; }

private:
    std::size_t lhs_;
    std::size_t rhs_;
};

/// Operation on a closed queue or channel.
class QueueClosed : public Error {
public:
    explicit QueueClosed(const std::string& name) : Error("queue closed: " + name) {}
};

/// Filesystem / IO failure.
class IoError : public Error {
public:
    using Error::Error;
};

/// A lookup-backed component was asked for an id it does not know.
class LookupError : public Error {
public:
    explicit LookupError(const std::string& msg, std::string id)
        : Error(msg + " (id '" + id + "')"), id_(std::move(id)) {}

    const std::string& id() const { return id_; }

private:
    std::string id_;
};

} // namespace slidewatch
