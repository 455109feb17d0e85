#include "hamlens/errors.hpp"

namespace hamlens {

const char* error_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::NonSymmetricMatrix: return "NonSymmetricMatrix";
        case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
        case ErrorCode::SingularMatrix: return "SingularMatrix";
        case ErrorCode::BadDegree: return "BadDegree";
        case ErrorCode::NonPositiveLambda: return "NonPositiveLambda";
        case ErrorCode::StepSizeUnderflow: return "StepSizeUnderflow";
        case ErrorCode::MaxTimeExceeded: return "MaxTimeExceeded";
        case ErrorCode::NoHitWithinMaxTime: return "NoHitWithinMaxTime";
        case ErrorCode::TangentialHit: return "TangentialHit";
        case ErrorCode::NoChartCovers: return "NoChartCovers";
        case ErrorCode::NoTransversalSolution: return "NoTransversalSolution";
        case ErrorCode::NoRoot: return "NoRoot";
        case ErrorCode::AmbiguousBranch: return "AmbiguousBranch";
        case ErrorCode::Trapped: return "Trapped";
        case ErrorCode::NewtonDiverged: return "NewtonDiverged";
        case ErrorCode::ConjugatePoint: return "ConjugatePoint";
        case ErrorCode::LevelSetViolation: return "LevelSetViolation";
        case ErrorCode::NonPositiveMu: return "NonPositiveMu";
        case ErrorCode::InverseChartFailure: return "InverseChartFailure";
        case ErrorCode::SingularJacobian: return "SingularJacobian";
        case ErrorCode::SingularMixedHessian: return "SingularMixedHessian";
        case ErrorCode::NotConvexOnImage: return "NotConvexOnImage";
        case ErrorCode::TangentialVector: return "TangentialVector";
        case ErrorCode::ConfigParse: return "ConfigParse";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "UnknownError";
}

} // namespace hamlens
