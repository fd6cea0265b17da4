#pragma once

#include <stdexcept>
#include <string>

namespace aftermath {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace aftermath
