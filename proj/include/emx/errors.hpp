#pragma once

#include <stdexcept>
#include <string>

namespace emx {

// Domain error codes. The CLI maps these onto process exit codes:
// anything input-shaped -> 2, domain validation -> 4, the rest -> 3.
enum class Errc {
    UnknownAccount,
    InsufficientBalance,
    NonMonotoneSeq,
    DuplicateAccount,
    InsufficientTokens,
    InsufficientCurrency,
    MixedTokenBook,
    InvalidOrder,
    FixtureShapeMismatch,
    DayOutOfRange,
    TooManyPoints,
    NonMonotoneFiltration,
    UnknownNode,
    MixedTokens,
    MissingDiagram,
    InputMismatch,
    ParseError,
    IoError,
};

class Error : public std::runtime_error {
public:
    Error(Errc code, std::string msg) : std::runtime_error(std::move(msg)), code_(code) {}
    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

} // namespace emx
