#pragma once

#include <stdexcept>
#include <string>

namespace mthdro {

enum class ErrorCode {
    InvalidArgument,
    DimensionMismatch,
    CapExceeded,
    BalanceViolation,
    EmptySupport,
    UnboundedValue,
    NormMismatch,
    EmptyIntersection,
    EnumerationCapExceeded,
    UnboundedSupport,
    InfeasibleX,
    InfeasibleGrid,
    SchemaViolation,
    SolverFailure,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition) throw Error(code, message);
}

}  // namespace mthdro
