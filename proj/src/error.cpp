#include "taillight/error.hpp"

namespace taillight {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::ZeroNorm: return "ZeroNorm";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::NonPositiveTemperature: return "NonPositiveTemperature";
        case ErrorCode::NonPositiveEntry: return "NonPositiveEntry";
        case ErrorCode::NonFiniteInput: return "NonFiniteInput";
        case ErrorCode::NonFiniteEvaluation: return "NonFiniteEvaluation";
        case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
        case ErrorCode::ManifestMissing: return "ManifestMissing";
        case ErrorCode::InvalidManifest: return "InvalidManifest";
        case ErrorCode::DimMismatch: return "DimMismatch";
        case ErrorCode::TruncatedMatrix: return "TruncatedMatrix";
        case ErrorCode::DuplicateClassId: return "DuplicateClassId";
        case ErrorCode::TextNotFound: return "TextNotFound";
        case ErrorCode::InvalidRho: return "InvalidRho";
        case ErrorCode::TooManyTasks: return "TooManyTasks";
        case ErrorCode::MissingSlot: return "MissingSlot";
        case ErrorCode::EmptyResponse: return "EmptyResponse";
        case ErrorCode::NoPhrases: return "NoPhrases";
        case ErrorCode::LlmUnavailable: return "LlmUnavailable";
        case ErrorCode::ClassCollision: return "ClassCollision";
        case ErrorCode::DegenerateTree: return "DegenerateTree";
        case ErrorCode::UnknownClass: return "UnknownClass";
        case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
        case ErrorCode::TooFewClasses: return "TooFewClasses";
        case ErrorCode::NoClasses: return "NoClasses";
        case ErrorCode::IncompleteMatrix: return "IncompleteMatrix";
        case ErrorCode::SingleTask: return "SingleTask";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

int exit_code_for(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::LlmUnavailable:
        case ErrorCode::EmptyResponse:
        case ErrorCode::MissingSlot:
            return 3;
        case ErrorCode::ZeroNorm:
        case ErrorCode::DimensionMismatch:
        case ErrorCode::ShapeMismatch:
        case ErrorCode::NonPositiveTemperature:
        case ErrorCode::NonPositiveEntry:
        case ErrorCode::NonFiniteInput:
        case ErrorCode::NonFiniteEvaluation:
        case ErrorCode::NotPositiveDefinite:
        case ErrorCode::NonFiniteGradient:
        case ErrorCode::DegenerateTree:
        case ErrorCode::TooFewClasses:
        case ErrorCode::NoClasses:
        case ErrorCode::IncompleteMatrix:
        case ErrorCode::SingleTask:
            return 4;
        default:
            return 2;
    }
}

}  // namespace taillight
