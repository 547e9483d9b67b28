#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace drivekit {

/// Base of every error raised by the toolkit. `kind()` is the stable,
/// machine-readable tag written into CLI error records.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

/// Malformed input line. `line()` is 1-based.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& message)
        : Error("parse_error", "line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A well-formed record that violates a domain invariant.
class ValidationError : public Error {
public:
    ValidationError(std::string clip_id, std::string rule)
        : Error("validation_error", "clip '" + clip_id + "': " + rule),
          clip_id_(std::move(clip_id)),
          rule_(std::move(rule)) {}

    const std::string& clip_id() const noexcept { return clip_id_; }
    const std::string& rule() const noexcept { return rule_; }

private:
    std::string clip_id_;
    std::string rule_;
};

/// A required field could not be pulled out of free text.
class ExtractionError : public Error {
public:
    explicit ExtractionError(std::string field)
        : Error("extraction_error", "missing or non-numeric field '" + field + "'"),
          field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class RangeError : public Error {
public:
    explicit RangeError(const std::string& message) : Error("range_error", message) {}
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& message) : Error("shape_error", message) {}
};

class TransportError : public Error {
public:
    explicit TransportError(const std::string& message) : Error("transport_error", message) {}
};

/// The chat endpoint answered with a non-success status.
class ServiceError : public Error {
public:
    ServiceError(int status, std::string body)
        : Error("service_error", "status " + std::to_string(status) + ": " + body),
          status_(status),
          body_(std::move(body)) {}

    int status() const noexcept { return status_; }
    const std::string& body() const noexcept { return body_; }

private:
    int status_;
    std::string body_;
};

class DecodeError : public Error {
public:
    explicit DecodeError(const std::string& message) : Error("decode_error", message) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error("config_error", message) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error("io_error", message) {}
};

}  // namespace drivekit
