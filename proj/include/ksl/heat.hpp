#pragma once

// The heat semigroup e^{t Laplacian} and its gradient as exact spectral
// multipliers, plus the L^q -> L^p and small-time profile harnesses.

#include <span>
#include <utility>
#include <vector>

#include "ksl/field.hpp"

namespace ksl {

Field heat_evolve(const Field& f, double t);

/// grad e^{t Laplacian} f; t must be positive.
VectorField grad_heat_evolve(const Field& f, double t);

/// Spectral gradient of f (Nyquist modes dropped).
VectorField spectral_gradient(const Field& f);

/// Smallest time at which the grid represents a point-mass heat kernel.
inline double resolution_floor(const GridSpec& g) { return 9.0 * g.dx() * g.dx(); }

struct LqLpReport {
  double q = 1.0;
  double p = 1.0;
  std::vector<std::pair<double, double>> ratios;  // (t, ratio)
  double max_ratio = 0.0;
};

/// Ratios ||e^{t Lap} z||_p / (t^{1/p - 1/q} ||z||_q) over t_list; 1 <= q <= p.
LqLpReport verify_lq_lp(const Field& z, double q, double p, std::span<const double> t_list);

/// Samples of t^{1-1/p} ||.||_p in increasing t.
struct HyperNormRecord {
  double p = 4.0 / 3.0;
  std::vector<std::pair<double, double>> samples;
  double sup_value = 0.0;
  /// Set when requested times fell below the resolution floor and were dropped.
  bool truncated = false;

  void add(double t, double value);
};

HyperNormRecord hyper_limit_profile(const Field& z, double p, std::span<const double> t_grid);

/// Profile of e^{t Lap} applied to an atomic measure mollified at atoms.delta;
/// realized as the atoms mollified at delta + t.
HyperNormRecord hyper_limit_profile(const GridSpec& grid, const AtomSpec& atoms, double p,
                                    std::span<const double> t_grid);

/// Measured plateau t^{1-1/p} ||e^{t Lap} mu||_p / mass for a single atom at
/// the centre, evaluated at time t (must be resolved).
double single_atom_plateau(const GridSpec& grid, double p, double t);

}  // namespace ksl
