#pragma once

#include <stdexcept>
#include <string>

namespace mmdrive {

// Caller supplied a value outside an operation's contract.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Index or time outside the valid domain (e.g. a frame past the scene end).
class OutOfRange : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Object used in a state that does not support the operation.
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace mmdrive
