#pragma once

#include <stdexcept>
#include <string>

namespace dcc {

enum class Errc {
    WrongMode,
    MissingExemplars,
    EmptyPrompt,
    FormatError,
    PoolTooLarge,
    EmptyRemainder,
    EmptyRecords,
    NoNumericAnswer,
    NoStringLiteral,
    UnterminatedString,
    DivisionByZero,
    NonFinite,
    InvalidTriple,
    Transport,
    BackendRejected,
    Timeout,
    Io,
    Config,
};

const char* errc_name(Errc code);

// Single exception type carrying a machine-checkable code. Soft outcomes
// (parse failures, no-agreement) are return values, not exceptions.
class DccError : public std::runtime_error {
public:
    DccError(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

inline const char* errc_name(Errc code) {
    switch (code) {
        case Errc::WrongMode: return "WrongMode";
        case Errc::MissingExemplars: return "MissingExemplars";
        case Errc::EmptyPrompt: return "EmptyPrompt";
        case Errc::FormatError: return "FormatError";
        case Errc::PoolTooLarge: return "PoolTooLarge";
        case Errc::EmptyRemainder: return "EmptyRemainder";
        case Errc::EmptyRecords: return "EmptyRecords";
        case Errc::NoNumericAnswer: return "NoNumericAnswer";
        case Errc::NoStringLiteral: return "NoStringLiteral";
        case Errc::UnterminatedString: return "UnterminatedString";
        case Errc::DivisionByZero: return "DivisionByZero";
        case Errc::NonFinite: return "NonFinite";
        case Errc::InvalidTriple: return "InvalidTriple";
        case Errc::Transport: return "Transport";
        case Errc::BackendRejected: return "BackendRejected";
        case Errc::Timeout: return "Timeout";
        case Errc::Io: return "Io";
        case Errc::Config: return "Config";
    }
    return "Unknown";
}

}  // namespace dcc
