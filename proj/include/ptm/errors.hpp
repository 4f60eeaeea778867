#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ptm {

/// Malformed input: a file line or record that cannot be read.
class parse_error : public std::runtime_error {
  public:
    parse_error(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what),
          line_(line) {}

    /// 1-based line number, 0 when the error is not tied to a line.
    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

/// Well-formed input that violates a precondition or invariant.
class validation_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Bad or incomplete run configuration.
class config_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

} // namespace ptm
