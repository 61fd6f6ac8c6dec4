#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace seqcl {

// Error taxonomy shared across the library. The CLI maps these onto exit
// codes (config -> 2, numeric -> 3, oracle cap -> 4).
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
    using Error::Error;
};
struct DomainError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct StateError : Error {
    using Error::Error;
};
struct NumericError : Error {
    using Error::Error;
};
struct OracleCapError : Error {
    using Error::Error;
};

// Raised when a PSD factorization still fails after jitter escalation.
// Carries the full ladder of jitters that were attempted.
class SingularError : public Error {
public:
    SingularError(const std::string& msg, std::vector<double> ladder)
        : Error(msg), attempted_jitters_(std::move(ladder)) {}

    const std::vector<double>& attempted_jitters() const { return attempted_jitters_; }

private:
    std::vector<double> attempted_jitters_;
};

} // namespace seqcl
