#pragma once

#include <stdexcept>
#include <string>

namespace tdp {

/// Invalid configuration: bad schedule bounds, inconsistent horizon/kappa, missing files.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Malformed input data: shape mismatches, short trajectories, non-finite observations.
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// An operation was invoked on an object in the wrong state.
struct StateError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Training diverged (non-finite loss).
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace tdp
