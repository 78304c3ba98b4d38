#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace taillight {

enum class ErrorCode {
    // numerics
    ZeroNorm,
    DimensionMismatch,
    ShapeMismatch,
    NonPositiveTemperature,
    NonPositiveEntry,
    NonFiniteInput,
    NonFiniteEvaluation,
    NotPositiveDefinite,
    // embedding store
    ManifestMissing,
    InvalidManifest,
    DimMismatch,
    TruncatedMatrix,
    DuplicateClassId,
    TextNotFound,
    InvalidRho,
    TooManyTasks,
    // sltree
    MissingSlot,
    EmptyResponse,
    NoPhrases,
    LlmUnavailable,
    ClassCollision,
    // guidance / training
    DegenerateTree,
    UnknownClass,
    NonFiniteGradient,
    // evaluation
    TooFewClasses,
    NoClasses,
    IncompleteMatrix,
    SingleTask,
    // plumbing
    InvalidConfig,
    IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Process exit code for the CLI: 2 config/IO, 3 LLM, 4 numeric.
int exit_code_for(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::string path = {})
        : std::runtime_error(std::string(to_string(code)) + ": " + message),
          code_(code), path_(std::move(path)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& path() const noexcept { return path_; }

private:
    ErrorCode code_;
    std::string path_;
};

}  // namespace taillight
