#pragma once

#include <stdexcept>
#include <string>

namespace sortcell {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A service did not answer within its deadline.
class TimeoutError : public Error {
 public:
  using Error::Error;
};

// The transport layer failed (connection refused, malformed reply, ...).
class TransportError : public Error {
 public:
  using Error::Error;
};

// Replay backend has no record for the requested id.
class UnknownRequestError : public Error {
 public:
  using Error::Error;
};

// A (state, event) pair outside the transition table. Bug trap, not a
// runtime path.
class ProtocolViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace sortcell
