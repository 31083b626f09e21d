#pragma once

#include <stdexcept>
#include <string>

namespace meanrev {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad user input: malformed files, inconsistent dimensions, out-of-range
// parameters. The CLI maps these to exit code 1.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Malformed text input; carries the 1-based line number when known.
class ParseError : public ValidationError {
public:
    ParseError(const std::string& file, long line, const std::string& what)
        : ValidationError(file + ":" + std::to_string(line) + ": " + what),
          file_(file), line_(line) {}

    const std::string& file() const noexcept { return file_; }
    long line() const noexcept { return line_; }

private:
    std::string file_;
    long line_;
};

// A matrix that must be invertible (or full column rank) is not.
class SingularError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// An iterative procedure ran out of iterations. The CLI maps this to exit
// code 2; callers that can recover may catch it and inspect the last state
// (see cost_optimizer.hpp for the variant that carries one).
class ConvergenceError : public Error {
public:
    using Error::Error;
};

}  // namespace meanrev
