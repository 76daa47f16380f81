#pragma once

// Chemoattractant solve for Lap v + u = 0.
//
// Two independent backends:
//  - periodic spectral: solves Lap v + (u - mean u) = 0 on the torus;
//  - free space: aperiodic convolution with -(1/2pi) log|x| on a zero-padded
//    2n x 2n grid, gradient by convolution with -x / (2 pi |x|^2).
// v is reported mean-zero in both cases; only grad v enters the dynamics.

#include <string_view>

#include "ksl/field.hpp"

namespace ksl {

enum class PoissonBackend { periodic_spectral, free_space };

std::string_view to_string(PoissonBackend b);
PoissonBackend parse_backend(std::string_view s);

struct ChemoSolution {
  Field v;
  VectorField grad_v;
  PoissonBackend backend;
  /// Box mean removed from the source (periodic backend); zero otherwise.
  double source_mean = 0.0;
};

ChemoSolution solve_periodic(const Field& u);

/// Throws ConfigError when less than (1 - 1e-6) of the mass lies in the inner half-box.
ChemoSolution solve_freespace(const Field& u);

/// Free-space gradient without the support check (used inside time stepping).
VectorField freespace_gradient(const Field& u);
VectorField periodic_gradient(const Field& u);

inline VectorField chemo_gradient(const Field& u, PoissonBackend b) {
  return b == PoissonBackend::periodic_spectral ? periodic_gradient(u) : freespace_gradient(u);
}

struct CrossValidation {
  double discrepancy = 0.0;  // max |grad_p - grad_f| / max |grad_f| over the inner disc |x| <= L/8
  double tolerance = 0.03;
  bool sufficient_box = true;  // discrepancy below tolerance
};

CrossValidation cross_validate(const Field& u);

/// Mean of grad v . (x - c)/|x - c| over the circle |x - c| = r, bilinear interpolation
/// of the nodal gradient with periodic wrap. By the divergence theorem this is
/// -(enclosed source)/(2 pi r) for any solution, symmetric or not.
double mean_radial_gradient(const VectorField& grad_v, Point center, double r, int samples = 512);

/// Mean of log|x| over the square [-h/2, h/2]^2.
double cell_average_log(double h);

}  // namespace ksl
