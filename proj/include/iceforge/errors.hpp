#pragma once

#include <stdexcept>
#include <string>

namespace iceforge {

enum class ErrorCode {
    // manifest
    SyntaxError,
    DuplicateTool,
    DanglingOverride,
    MissingPin,
    MalformedCommit,
    BadIdentifier,
    EnvironmentMismatch,
    UnknownTool,
    CliNameCollision,
    InvalidManifest,
    // verspec
    MalformedVersion,
    MalformedRequirement,
    UnknownPackage,
    MergeConflict,
    // patchkit
    MalformedDiff,
    HunkCountMismatch,
    TargetMissing,
    ContextMismatch,
    UnreadableTree,
    // emitter / executor
    NotStatic,
    FetchMiss,
    SymlinkCollision,
    DanglingSymlink,
    UnexpectedSymlink,
    PinViolation,
};

inline const char* error_code_name(ErrorCode c) {
    switch (c) {
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::DuplicateTool: return "DuplicateTool";
    case ErrorCode::DanglingOverride: return "DanglingOverride";
    case ErrorCode::MissingPin: return "MissingPin";
    case ErrorCode::MalformedCommit: return "MalformedCommit";
    case ErrorCode::BadIdentifier: return "BadIdentifier";
    case ErrorCode::EnvironmentMismatch: return "EnvironmentMismatch";
    case ErrorCode::UnknownTool: return "UnknownTool";
    case ErrorCode::CliNameCollision: return "CliNameCollision";
    case ErrorCode::InvalidManifest: return "InvalidManifest";
    case ErrorCode::MalformedVersion: return "MalformedVersion";
    case ErrorCode::MalformedRequirement: return "MalformedRequirement";
    case ErrorCode::UnknownPackage: return "UnknownPackage";
    case ErrorCode::MergeConflict: return "MergeConflict";
    case ErrorCode::MalformedDiff: return "MalformedDiff";
    case ErrorCode::HunkCountMismatch: return "HunkCountMismatch";
    case ErrorCode::TargetMissing: return "TargetMissing";
    case ErrorCode::ContextMismatch: return "ContextMismatch";
    case ErrorCode::UnreadableTree: return "UnreadableTree";
    case ErrorCode::NotStatic: return "NotStatic";
    case ErrorCode::FetchMiss: return "FetchMiss";
    case ErrorCode::SymlinkCollision: return "SymlinkCollision";
    case ErrorCode::DanglingSymlink: return "DanglingSymlink";
    case ErrorCode::UnexpectedSymlink: return "UnexpectedSymlink";
    case ErrorCode::PinViolation: return "PinViolation";
    }
    return "Unknown";
}

/// Library-wide exception. `code()` identifies the failure class so callers
/// can branch without string matching; the message carries the details.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

} // namespace iceforge
