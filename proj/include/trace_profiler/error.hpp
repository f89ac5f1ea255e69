#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace trace_profiler {

enum class ErrorCode {
    // corpus
    MissingField,
    DuplicateId,
    EmptyCorpus,
    ParseError,
    NoThinkSpan,
    UnbalancedTags,
    ContentBeforeThink,
    // generic
    Precondition,
    EmptyInput,
    // metrics
    EmptyText,
    ZeroVector,
    EmptyTokenization,
    TooManyFailures,
    // fvcu
    NonVerbatimStep,
    InsufficientCoverage,
    MalformedVerdict,
    NoVerdicts,
    // sampling
    NTooLarge,
    // evaluation
    ZeroBaseline,
    LengthMismatch,
    // correlation
    DegenerateSeries,
    VariantMismatch,
    TooFewVariants,
    // providers
    Timeout,
    RateLimited,
    PermanentProviderError,
    ProviderError,
    CacheCorrupt,
    // cli
    ConfigError,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::MissingField: return "MissingField";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::EmptyCorpus: return "EmptyCorpus";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::NoThinkSpan: return "NoThinkSpan";
        case ErrorCode::UnbalancedTags: return "UnbalancedTags";
        case ErrorCode::ContentBeforeThink: return "ContentBeforeThink";
        case ErrorCode::Precondition: return "Precondition";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::EmptyText: return "EmptyText";
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::EmptyTokenization: return "EmptyTokenization";
        case ErrorCode::TooManyFailures: return "TooManyFailures";
        case ErrorCode::NonVerbatimStep: return "NonVerbatimStep";
        case ErrorCode::InsufficientCoverage: return "InsufficientCoverage";
        case ErrorCode::MalformedVerdict: return "MalformedVerdict";
        case ErrorCode::NoVerdicts: return "NoVerdicts";
        case ErrorCode::NTooLarge: return "NTooLarge";
        case ErrorCode::ZeroBaseline: return "ZeroBaseline";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::DegenerateSeries: return "DegenerateSeries";
        case ErrorCode::VariantMismatch: return "VariantMismatch";
        case ErrorCode::TooFewVariants: return "TooFewVariants";
        case ErrorCode::Timeout: return "Timeout";
        case ErrorCode::RateLimited: return "RateLimited";
        case ErrorCode::PermanentProviderError: return "PermanentProviderError";
        case ErrorCode::ProviderError: return "ProviderError";
        case ErrorCode::CacheCorrupt: return "CacheCorrupt";
        case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

/// Single exception type for the library; callers branch on `code()`.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

    ErrorCode code() const noexcept { return code_; }
    // Message without the code prefix.
    const std::string& message() const noexcept { return message_; }

    // Timeouts and rate limits are the only failures worth retrying.
    bool transient() const noexcept {
        return code_ == ErrorCode::Timeout || code_ == ErrorCode::RateLimited;
    }

private:
    ErrorCode code_;
    std::string message_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool condition, const std::string& message) {
    if (!condition) fail(ErrorCode::Precondition, message);
}

}  // namespace trace_profiler
