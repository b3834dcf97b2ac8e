#pragma once

#include <stdexcept>
#include <string>

namespace sebench {

// Base for every error the toolkit raises on bad input or configuration.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration: unknown source, malformed step matrix, bad service config.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input files or arguments that violate an operation's precondition.
class InputError : public Error {
 public:
  using Error::Error;
};

// A prediction or classifier backend failed (transport, protocol, or process).
class BackendError : public Error {
 public:
  using Error::Error;
};

}  // namespace sebench
