#ifndef HARDMETRIC_ERRORS_HPP_
#define HARDMETRIC_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace hm {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad configuration or spec value (CLI exit 2).
struct ConfigError : Error {
  using Error::Error;
};

// API called with invalid arguments (CLI exit 2).
struct UsageError : Error {
  using Error::Error;
};

// Input data violates an invariant, e.g. non-finite values (CLI exit 2).
struct DataError : Error {
  using Error::Error;
};

// Evaluation protocol cannot be satisfied on the given dataset (CLI exit 2).
struct ProtocolError : Error {
  using Error::Error;
};

// Non-finite result in a numeric computation (CLI exit 3).
struct NumericError : Error {
  using Error::Error;
};

// Malformed input file; carries the 1-based line number (CLI exit 4).
struct ParseError : Error {
  ParseError(int line_no, const std::string& what)
      : Error("line " + std::to_string(line_no) + ": " + what), line(line_no) {}
  int line;
};

// Filesystem or serialization failure (CLI exit 4).
struct IoError : Error {
  using Error::Error;
};

}  // namespace hm

#endif  // HARDMETRIC_ERRORS_HPP_
