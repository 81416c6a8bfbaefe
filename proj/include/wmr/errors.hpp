#pragma once

#include <stdexcept>
#include <string>

namespace wmr {

/// Bad input: malformed files, dimension mismatches, missing config keys.
/// The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite losses/energies, singular systems. The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace wmr
