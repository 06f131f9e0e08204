#pragma once

#include <stdexcept>
#include <string>

namespace qnpop {

// Base for all library errors.
struct QnError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DomainEscape : QnError { using QnError::QnError; };
struct NegativeRate : QnError { using QnError::QnError; };
struct RateOverflow : QnError { using QnError::QnError; };
struct IntegratorBlowup : QnError { using QnError::QnError; };
struct QuasiNeutralMismatch : QnError { using QnError::QnError; };
struct ZeroTotal : QnError { using QnError::QnError; };
struct NoBracket : QnError { using QnError::QnError; };
struct NotConverging : QnError { using QnError::QnError; };
struct PitauViolation : QnError { using QnError::QnError; };
struct LambdaZero : QnError { using QnError::QnError; };
struct NoCommonRoot : QnError { using QnError::QnError; };

} // namespace qnpop
