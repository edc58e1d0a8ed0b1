#pragma once

#include <stdexcept>
#include <string>

namespace pdmp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A BoundedBy or thinned mechanism met a rate above its declared bound.
class RateBoundViolated : public Error {
 public:
  RateBoundViolated(double rate, double bound)
      : Error("rate " + std::to_string(rate) + " exceeds declared bound " +
              std::to_string(bound)),
        rate_(rate),
        bound_(bound) {}
  double rate() const { return rate_; }
  double bound() const { return bound_; }

 private:
  double rate_;
  double bound_;
};

// Raised by bulk experiments when a replica hits the event cap.
class ExplosionSuspected : public Error {
 public:
  using Error::Error;
};

class NumericInversionFailed : public Error {
 public:
  using Error::Error;
};

class UnalignedKernels : public Error {
 public:
  using Error::Error;
};

class KernelExpectationUnavailable : public Error {
 public:
  using Error::Error;
};

class TrajectoryTooShort : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace pdmp
