// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace clueseek {

enum class ErrorCode {
    Malformed,
    InvariantViolation,
    DuplicateId,
    EventExceedsDuration,
    EmptyInterval,
    InconsistentCount,
    InconsistentTokens,
    NonTerminalAnswer,
    BadTurnIndex,
    AdvanceAfterTerminal,
    ObservationPending,
    NoObservationExpected,
    ZeroLengthInterval,
    UnlabeledPhase,
    MissingGroundTruth,
    GroupTooSmall,
    AllMasked,
    LengthMismatch,
    UnknownSession,
    UnknownManifest,
    UnresolvableClue,
    PolicyFailure,
    JudgeFailure,
    BadConfig,
    IoError,
};

inline const char * error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::Malformed:            return "Malformed";
        case ErrorCode::InvariantViolation:   return "InvariantViolation";
        case ErrorCode::DuplicateId:          return "DuplicateId";
        case ErrorCode::EventExceedsDuration: return "EventExceedsDuration";
        case ErrorCode::EmptyInterval:        return "EmptyInterval";
        case ErrorCode::InconsistentCount:    return "InconsistentCount";
        case ErrorCode::InconsistentTokens:   return "InconsistentTokens";
        case ErrorCode::NonTerminalAnswer:    return "NonTerminalAnswer";
        case ErrorCode::BadTurnIndex:         return "BadTurnIndex";
        case ErrorCode::AdvanceAfterTerminal: return "AdvanceAfterTerminal";
        case ErrorCode::ObservationPending:   return "ObservationPending";
        case ErrorCode::NoObservationExpected:return "NoObservationExpected";
        case ErrorCode::ZeroLengthInterval:   return "ZeroLengthInterval";
        case ErrorCode::UnlabeledPhase:       return "UnlabeledPhase";
        case ErrorCode::MissingGroundTruth:   return "MissingGroundTruth";
        case ErrorCode::GroupTooSmall:        return "GroupTooSmall";
        case ErrorCode::AllMasked:            return "AllMasked";
        case ErrorCode::LengthMismatch:       return "LengthMismatch";
        case ErrorCode::UnknownSession:       return "UnknownSession";
        case ErrorCode::UnknownManifest:      return "UnknownManifest";
        case ErrorCode::UnresolvableClue:     return "UnresolvableClue";
        case ErrorCode::PolicyFailure:        return "PolicyFailure";
        case ErrorCode::JudgeFailure:         return "JudgeFailure";
        case ErrorCode::BadConfig:            return "BadConfig";
        case ErrorCode::IoError:              return "IoError";
    }
    return "Unknown";
}

/// Domain error carrying a stable reason code alongside the message.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string & message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

} // namespace clueseek
