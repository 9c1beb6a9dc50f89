#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hardy {

// Parameter outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

// A value object violated one of its invariants.
class ValidationError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Malformed input data; line is 1-based, 0 when not line oriented.
class DataFormatError : public std::runtime_error {
  public:
    DataFormatError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")"
                                  : what),
          line_(line) {}
    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

class InsufficientDataError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace hardy
