#ifndef DSCS_ERROR_HPP
#define DSCS_ERROR_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dscs {

// Numeric values are part of the wire protocol (error reply code field).
enum class ErrorCode : std::uint16_t {
    Internal = 1,
    LengthMismatch = 2,
    NotInvertible = 3,
    GenerationTimeout = 4,
    IndexOutOfRange = 5,
    StaleProof = 6,
    SegmentOutOfField = 7,
    NonInvertibleDenominator = 8,
    BadCardinality = 9,
    AppendOnly = 10,
    ExtractionStalled = 11,
    DuplicateFid = 12,
    CountMismatch = 13,
    UnknownFid = 14,
    Busy = 15,
    Malformed = 16,
    UnknownMessage = 17,
    Io = 18,
    Transport = 19,
    Usage = 20,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::Internal: return "Internal";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NotInvertible: return "NotInvertible";
    case ErrorCode::GenerationTimeout: return "GenerationTimeout";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::StaleProof: return "StaleProof";
    case ErrorCode::SegmentOutOfField: return "SegmentOutOfField";
    case ErrorCode::NonInvertibleDenominator: return "NonInvertibleDenominator";
    case ErrorCode::BadCardinality: return "BadCardinality";
    case ErrorCode::AppendOnly: return "AppendOnly";
    case ErrorCode::ExtractionStalled: return "ExtractionStalled";
    case ErrorCode::DuplicateFid: return "DuplicateFid";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::UnknownFid: return "UnknownFid";
    case ErrorCode::Busy: return "Busy";
    case ErrorCode::Malformed: return "Malformed";
    case ErrorCode::UnknownMessage: return "UnknownMessage";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Transport: return "Transport";
    case ErrorCode::Usage: return "Usage";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

} // namespace dscs

#endif // DSCS_ERROR_HPP
