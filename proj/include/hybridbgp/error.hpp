#pragma once

#include <stdexcept>
#include <string>

namespace hybridbgp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid parameters, scenario files, or topology construction requests.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// An event was scheduled before the current virtual clock.
class SchedulingError : public Error {
 public:
  using Error::Error;
};

// A hard run invariant (post-convergence loop, non-quiescent measurement) failed.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace hybridbgp
