#pragma once

#include <stdexcept>
#include <string>

namespace stein {

// Base class for everything thrown by this library.
struct error : std::runtime_error {
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad inputs: config mistakes, precondition violations, parse failures.
// The CLI maps these to exit code 2.
struct domain_error : error {
    explicit domain_error(const std::string& msg) : error(msg) {}
};

// Expression parse failure, with byte offset into the source text.
struct parse_error : domain_error {
    parse_error(const std::string& msg, std::size_t pos)
        : domain_error(msg + " (at position " + std::to_string(pos) + ")"), position(pos) {}
    std::size_t position;
};

// Runtime evaluation failure (log of a nonpositive value, division by zero, ...).
struct eval_error : error {
    eval_error(const std::string& msg, std::size_t pos)
        : error(msg + " (expression position " + std::to_string(pos) + ")"), position(pos) {}
    std::size_t position;
};

// Non-convergent quadrature, divergent integrals, degenerate statistics.
// The CLI maps these to exit code 3.
struct numerical_error : error {
    explicit numerical_error(const std::string& msg) : error(msg) {}
};

// theta <= 0 encountered where a density was requested. Exit code 4.
struct existence_error : error {
    explicit existence_error(const std::string& msg) : error(msg) {}
};

}  // namespace stein
