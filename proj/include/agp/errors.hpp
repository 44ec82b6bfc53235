#pragma once

#include <stdexcept>
#include <string>

namespace agp {

// Stable error taxonomy shared by the registries, the control-plane server
// and the evolution engine. The server maps each kind to a fixed numeric
// code, so the enumerator order is part of the wire contract.
enum class ErrorKind {
    RootNotFound,
    DuplicateName,
    InvalidRecord,
    NotFound,
    VersionNotFound,
    InvalidDelta,
    NotLearnable,
    UnknownVariable,
    BuildFailure,
    ExecutionError,
    ParseError,
    UnsupportedFormatVersion,
    PathError,
    NonMonotonicVersion,
    TraceClosed,
    InvalidArgument,
    AllProvidersFailed,
    MethodNotFound,
    InvalidParams,
    EmptyCandidateSet,
    NoAgents,
    BindError,
    UnregisteredResource,
};

inline const char* error_kind_name(ErrorKind k) {
    switch (k) {
        case ErrorKind::RootNotFound: return "RootNotFound";
        case ErrorKind::DuplicateName: return "DuplicateName";
        case ErrorKind::InvalidRecord: return "InvalidRecord";
        case ErrorKind::NotFound: return "NotFound";
        case ErrorKind::VersionNotFound: return "VersionNotFound";
        case ErrorKind::InvalidDelta: return "InvalidDelta";
        case ErrorKind::NotLearnable: return "NotLearnable";
        case ErrorKind::UnknownVariable: return "UnknownVariable";
        case ErrorKind::BuildFailure: return "BuildFailure";
        case ErrorKind::ExecutionError: return "ExecutionError";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::UnsupportedFormatVersion: return "UnsupportedFormatVersion";
        case ErrorKind::PathError: return "PathError";
        case ErrorKind::NonMonotonicVersion: return "NonMonotonicVersion";
        case ErrorKind::TraceClosed: return "TraceClosed";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::AllProvidersFailed: return "AllProvidersFailed";
        case ErrorKind::MethodNotFound: return "MethodNotFound";
        case ErrorKind::InvalidParams: return "InvalidParams";
        case ErrorKind::EmptyCandidateSet: return "EmptyCandidateSet";
        case ErrorKind::NoAgents: return "NoAgents";
        case ErrorKind::BindError: return "BindError";
        case ErrorKind::UnregisteredResource: return "UnregisteredResource";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
          kind_(kind),
          message_(std::move(message)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& message() const noexcept { return message_; }

private:
    ErrorKind kind_;
    std::string message_;
};

}  // namespace agp
