#pragma once

#include <stdexcept>
#include <string>

namespace bikebot {

/// Invalid model, configuration file or argument.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// No feasible iterate found by the optimizer from any start.
class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Segment cannot satisfy the steering-rate bound within its duration.
class InfeasibleSegment : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Integrator state exceeded the velocity guard.
class SimulationBlowUp : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bikebot
