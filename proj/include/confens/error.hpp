#pragma once

#include <stdexcept>
#include <string>

namespace confens {

enum class ErrorCode {
    Dimension,   // zero or negative grid dimension
    Argument,    // mismatched grids, member counts, empty inputs
    Split,       // split sizes exceed dataset length
    Infeasible,  // alpha too small for the calibration size
    Singular,    // singular normal equations
    Training,    // optimizer produced a non-finite loss
    Numerical,   // factorization failure after jitter retries
    Format,      // malformed file header or magic
    Truncation,  // payload shorter than the header claims
    Data,        // non-finite payload values
    Config,      // unknown configuration key or invalid setting
    Type,        // unparsable configuration value
    Io,          // unreadable or unwritable path
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// Process exit code for a failed CLI invocation: 2 configuration, 3 data, 4 numerical.
int exit_code_for(ErrorCode code);

[[noreturn]] void fail(ErrorCode code, const std::string& what);

inline void require(bool cond, ErrorCode code, const std::string& what) {
    if (!cond) fail(code, what);
}

}  // namespace confens
