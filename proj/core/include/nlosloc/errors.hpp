#pragma once

#include <stdexcept>
#include <string>

namespace nlos {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scatterer plane parallel to the arrival ray: |cos(theta - gamma)| too small.
class SingularGeometry : public Error {
 public:
  using Error::Error;
};

class NonPhysicalPath : public Error {
 public:
  using Error::Error;
};

class InconsistentScenario : public Error {
 public:
  using Error::Error;
};

class DisconnectedTopology : public Error {
 public:
  using Error::Error;
};

class Underdetermined : public Error {
 public:
  using Error::Error;
};

class SlotCollision : public Error {
 public:
  using Error::Error;
};

class FlatCorrelation : public Error {
 public:
  using Error::Error;
};

/// Malformed or out-of-range configuration (scenario, sweep or relay JSON).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace nlos
