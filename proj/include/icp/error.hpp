#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace icp {

// Error categories map onto CLI exit codes: ConfigError -> 1,
// DataError -> 2, NumericError -> 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

struct ParseError : DataError {
  ParseError(const std::string& what, std::size_t line_number)
      : DataError("line " + std::to_string(line_number) + ": " + what),
        line(line_number) {}
  std::size_t line;
};

}  // namespace icp
