#pragma once

#include <stdexcept>
#include <string>

namespace phdelay {

/// Matrix or vector dimensions do not fit together.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An argument lies outside the domain of the operation (negative time,
/// nonpositive rate, invalid probability vector, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The operation does not apply to this kind of input, e.g. asking for
/// closed first-moment equations of a bimolecular network.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace phdelay
