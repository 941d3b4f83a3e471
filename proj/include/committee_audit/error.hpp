#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace committee_audit {

enum class ErrorKind {
    Format,        // wrong magic/version, malformed file structure
    Io,            // truncated payload, unreadable/unwritable sink
    Validation,    // a data invariant does not hold
    Precondition,  // an operation was called outside its domain
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Format: return "format";
    case ErrorKind::Io: return "io";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Precondition: return "precondition";
    }
    return "unknown";
}

/// Base of every error raised by the library. The kind maps onto the CLI exit status.
class AuditError : public std::runtime_error {
public:
    AuditError(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class FormatError : public AuditError {
public:
    explicit FormatError(const std::string& what) : AuditError(ErrorKind::Format, what) {}
};

class IoError : public AuditError {
public:
    explicit IoError(const std::string& what) : AuditError(ErrorKind::Io, what) {}
};

class ValidationError : public AuditError {
public:
    explicit ValidationError(const std::string& what) : AuditError(ErrorKind::Validation, what) {}
};

class PreconditionError : public AuditError {
public:
    explicit PreconditionError(const std::string& what)
        : AuditError(ErrorKind::Precondition, what) {}
};

} // namespace committee_audit
