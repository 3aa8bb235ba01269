#pragma once

#include <stdexcept>
#include <string>

namespace wg {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Incompatible tensor shapes; the message carries both shapes.
class ShapeError : public Error {
  using Error::Error;
};

// Violated precondition or API contract.
class ContractError : public Error {
  using Error::Error;
};

// Non-finite value produced by an op (debug screening) or fed to one.
class NumericError : public Error {
  using Error::Error;
};

// File format or IO failure.
class IoError : public Error {
  using Error::Error;
};

}  // namespace wg
