#pragma once

#include <stdexcept>
#include <string>

namespace csync {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

/// Config validation failure; `field` is a dotted path such as
/// "inverters[1].droop.k_r".
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class UnknownElement : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public Error {
 public:
  using Error::Error;
};

class NoSourceInIsland : public Error {
 public:
  using Error::Error;
};

class InsufficientWindow : public Error {
 public:
  using Error::Error;
};

}  // namespace csync
