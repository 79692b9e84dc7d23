#pragma once

#include <stdexcept>
#include <string>

namespace isp {

/// Failure categories, mapped to CLI exit codes by tools/isp_main.
enum class ErrorCategory {
    invalid_argument = 1,
    conditioning = 2,
    misalignment = 3,
    cfl = 4,
    nonfinite = 5,
    solver = 6,
    config = 7,
    io = 8,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& message)
        : std::runtime_error(message), category_(category) {}

    ErrorCategory category() const { return category_; }

private:
    ErrorCategory category_;
};

inline void require(bool condition, ErrorCategory category, const std::string& message) {
    if (!condition) throw Error(category, message);
}

} // namespace isp
