#include "confens/error.hpp"

namespace confens {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::Dimension: return "dimension error";
        case ErrorCode::Argument: return "argument error";
        case ErrorCode::Split: return "split error";
        case ErrorCode::Infeasible: return "infeasible-level error";
        case ErrorCode::Singular: return "singularity error";
        case ErrorCode::Training: return "training error";
        case ErrorCode::Numerical: return "numerical error";
        case ErrorCode::Format: return "format error";
        case ErrorCode::Truncation: return "truncation error";
        case ErrorCode::Data: return "data error";
        case ErrorCode::Config: return "configuration error";
        case ErrorCode::Type: return "type error";
        case ErrorCode::Io: return "io error";
    }
    return "error";
}

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::Config:
        case ErrorCode::Type:
        case ErrorCode::Split:
        case ErrorCode::Infeasible:
            return 2;
        case ErrorCode::Singular:
        case ErrorCode::Training:
        case ErrorCode::Numerical:
            return 4;
        default:
            return 3;
    }
}

void fail(ErrorCode code, const std::string& what) {
    throw Error(code, std::string(to_string(code)) + ": " + what);
}

}  // namespace confens
