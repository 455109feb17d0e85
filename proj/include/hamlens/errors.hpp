// Typed error conditions raised by library operations.
#pragma once

#include <stdexcept>
#include <string>

namespace hamlens {

enum class ErrorCode {
    NonSymmetricMatrix,
    NotPositiveDefinite,
    SingularMatrix,
    BadDegree,
    NonPositiveLambda,
    StepSizeUnderflow,
    MaxTimeExceeded,
    NoHitWithinMaxTime,
    TangentialHit,
    NoChartCovers,
    NoTransversalSolution,
    NoRoot,
    AmbiguousBranch,
    Trapped,
    NewtonDiverged,
    ConjugatePoint,
    LevelSetViolation,
    NonPositiveMu,
    InverseChartFailure,
    SingularJacobian,
    SingularMixedHessian,
    NotConvexOnImage,
    TangentialVector,
    ConfigParse,
    InvalidArgument,
};

const char* error_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

} // namespace hamlens
