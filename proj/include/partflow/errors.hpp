#pragma once

#include <stdexcept>

namespace partflow {

// Invalid user-supplied configuration (bad key, bad range, unparsable file).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// All importance weights vanished (every likelihood underflowed to the floor).
struct DegenerateWeightsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Too few samples/replications for the requested statistic.
struct InsufficientDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The combined curvature passed through zero where an inverse is needed.
struct SingularHessianError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Likelihood derivatives requested at a state with vanishing observation
// variance.
struct DegenerateVolatilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A numeric evaluation produced NaN/inf where a finite value is required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Failure writing or reading experiment artifacts.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace partflow
