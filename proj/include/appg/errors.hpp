#pragma once

#include <stdexcept>
#include <string>

namespace appg {

// Invalid experiment configuration (bad values or malformed config file).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// File could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace appg
