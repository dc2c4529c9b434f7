#pragma once

#include <stdexcept>
#include <string>

namespace faultsmith {

enum class ErrorCode {
    MissingFile,
    SchemaViolation,
    EmptyCorpus,
    BadRatios,
    CorpusTooSmall,
    DimensionMismatch,
    RemoteUnavailable,
    TooFewPoints,
    EmptyCluster,
    PoolTooSmall,
    QueryIsBuggy,
    EmptyPrompt,
    EndpointUnavailable,
    AuthFailure,
    ResponseMalformed,
    NoMutableSite,
    BadTemplate,
    SandboxSetupFailure,
    BadVerdict,
    EmptyTraining,
    ZeroAverage,
    GroupTooSmall,
    EmptyCounts,
    LengthMismatch,
    BadArity,
    ShortRanking,
    BadConfig,
    MissingUpstreamArtifact,
    IoFailure,
};

inline const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::MissingFile: return "MissingFile";
        case ErrorCode::SchemaViolation: return "SchemaViolation";
        case ErrorCode::EmptyCorpus: return "EmptyCorpus";
        case ErrorCode::BadRatios: return "BadRatios";
        case ErrorCode::CorpusTooSmall: return "CorpusTooSmall";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::RemoteUnavailable: return "RemoteUnavailable";
        case ErrorCode::TooFewPoints: return "TooFewPoints";
        case ErrorCode::EmptyCluster: return "EmptyCluster";
        case ErrorCode::PoolTooSmall: return "PoolTooSmall";
        case ErrorCode::QueryIsBuggy: return "QueryIsBuggy";
        case ErrorCode::EmptyPrompt: return "EmptyPrompt";
        case ErrorCode::EndpointUnavailable: return "EndpointUnavailable";
        case ErrorCode::AuthFailure: return "AuthFailure";
        case ErrorCode::ResponseMalformed: return "ResponseMalformed";
        case ErrorCode::NoMutableSite: return "NoMutableSite";
        case ErrorCode::BadTemplate: return "BadTemplate";
        case ErrorCode::SandboxSetupFailure: return "SandboxSetupFailure";
        case ErrorCode::BadVerdict: return "BadVerdict";
        case ErrorCode::EmptyTraining: return "EmptyTraining";
        case ErrorCode::ZeroAverage: return "ZeroAverage";
        case ErrorCode::GroupTooSmall: return "GroupTooSmall";
        case ErrorCode::EmptyCounts: return "EmptyCounts";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::BadArity: return "BadArity";
        case ErrorCode::ShortRanking: return "ShortRanking";
        case ErrorCode::BadConfig: return "BadConfig";
        case ErrorCode::MissingUpstreamArtifact: return "MissingUpstreamArtifact";
        case ErrorCode::IoFailure: return "IoFailure";
    }
    return "Unknown";
}

/// Library-wide exception type. Every precondition or environment failure
/// throws one of these; the code identifies the contract that was violated.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace faultsmith
