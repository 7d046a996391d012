#pragma once

#include <stdexcept>
#include <string>

namespace qcpd {

// Bad input data or configuration (CLI exit code 2).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure at runtime: divergence, underflow, non-finite loss (CLI exit code 3).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace qcpd
