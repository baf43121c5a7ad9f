#pragma once

#include <stdexcept>
#include <string>

namespace joris {

/// Invalid argument or input outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A stated precondition (bound, holomorphy, ...) does not hold on the data.
class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A verified inequality failed. `which` names the bound (e.g. "quotient_bound").
class BoundViolation : public std::runtime_error {
 public:
  BoundViolation(std::string which, const std::string& what)
      : std::runtime_error(which + ": " + what), which_(std::move(which)) {}
  const std::string& which() const noexcept { return which_; }

 private:
  std::string which_;
};

/// Corrupt or unreadable data file.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace joris
