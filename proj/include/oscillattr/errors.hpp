#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace oscillattr {

/// Rejected input: bad parameters, malformed files, unmet preconditions.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A trajectory left the finite region (|Y| > 1e12 or NaN).
class BlowUpError : public std::runtime_error {
public:
    BlowUpError(std::int64_t step, const std::string& what)
        : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

    std::int64_t step() const noexcept { return step_; }

private:
    std::int64_t step_;
};

}  // namespace oscillattr
