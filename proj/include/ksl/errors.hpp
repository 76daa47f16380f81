#pragma once

#include <stdexcept>
#include <string>

namespace ksl {

/// Invalid grid, box, or scenario parameters.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (p < 1, t < 0, ...).
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A feature is too narrow for the grid to represent.
struct ResolutionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Mismatched inputs (grids, node sets) passed to a multi-argument operation.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A time step that violates the advective or diffusive step limit.
struct StepRefused : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ksl
