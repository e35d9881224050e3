#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ihgnn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid model/run configuration or parameter shapes.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or out-of-range input data. `position` is the 1-based line or
// record number when one applies, 0 otherwise.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what, std::size_t position = 0)
      : Error(what), position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

// Reference to an entity or node that does not exist.
class LookupError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, divergence, failed sampling.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace ihgnn
