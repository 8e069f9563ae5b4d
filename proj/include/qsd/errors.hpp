#pragma once

#include <stdexcept>
#include <string>

namespace qsd {

// Invalid physical or numerical input. `field()` names the offending parameter
// using the same dot-path the config file uses, when there is one.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what, std::string field = {})
      : std::invalid_argument(what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Numerical failure during integration (step underflow, loss of positivity...).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qsd
