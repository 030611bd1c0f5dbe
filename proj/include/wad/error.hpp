#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wad {

enum class ErrorCode {
    ZeroVector,
    DimensionMismatch,
    EmptyPool,
    SingleClassPool,
    InvalidPair,
    LabelOutOfRange,
    NonFiniteGradient,
    EmptyTestSet,
    InvalidIndex,
    StaleSelection,
    InvariantViolation,
    MissingGroundTruth,
    InvalidInputs,
    EmptyAnnotations,
    CenterSamplingFailed,
    InvalidConfig,
    BadMagic,
    UnsupportedVersion,
    TruncatedPayload,
    NonUnitEmbedding,
    IndexGap,
    RowCountMismatch,
    MalformedRow,
    Io,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::EmptyPool: return "EmptyPool";
        case ErrorCode::SingleClassPool: return "SingleClassPool";
        case ErrorCode::InvalidPair: return "InvalidPair";
        case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
        case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
        case ErrorCode::EmptyTestSet: return "EmptyTestSet";
        case ErrorCode::InvalidIndex: return "InvalidIndex";
        case ErrorCode::StaleSelection: return "StaleSelection";
        case ErrorCode::InvariantViolation: return "InvariantViolation";
        case ErrorCode::MissingGroundTruth: return "MissingGroundTruth";
        case ErrorCode::InvalidInputs: return "InvalidInputs";
        case ErrorCode::EmptyAnnotations: return "EmptyAnnotations";
        case ErrorCode::CenterSamplingFailed: return "CenterSamplingFailed";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
        case ErrorCode::TruncatedPayload: return "TruncatedPayload";
        case ErrorCode::NonUnitEmbedding: return "NonUnitEmbedding";
        case ErrorCode::IndexGap: return "IndexGap";
        case ErrorCode::RowCountMismatch: return "RowCountMismatch";
        case ErrorCode::MalformedRow: return "MalformedRow";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

/// All library failures are reported through this exception; `code()` lets
/// callers dispatch without parsing the message.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace wad
