#pragma once

// Radially symmetric data run through both the 2D stepper and the 1D
// cumulative-mass solver, compared through m(r,t) = int_{B(r)} u.

#include <vector>

#include "ksl/evolution.hpp"
#include "ksl/radial.hpp"

namespace ksl {

struct CrossCheckSetup {
  double mass = 4.0 * 3.141592653589793;
  double width = 1.0;  // Gaussian profile M/(2 pi s^2) exp(-r^2 / 2 s^2)
  double box_length = 16.0;
  int n = 256;
  double t_end = 1.0;
  std::vector<double> compare_times;  // defaults to {t_end}
  std::vector<double> radii;          // defaults to a geometric ladder over [4 dx, L/4]
  double blowup_cap = 0.0;            // sup-norm cap shared by both solvers; 0 disables
  PoissonBackend backend = PoissonBackend::free_space;
  RadialGrid radial_grid;
};

struct CrossCheckRow {
  double t;
  double r;
  double mass_2d;
  double mass_radial;
  double discrepancy;  // |mass_2d - mass_radial| / mass_radial, 0 when both vanish
};

struct CrossCheckReport {
  std::vector<CrossCheckRow> rows;
  double max_discrepancy = 0.0;
  Outcome outcome_2d = Outcome::completed;
  RadialOutcome outcome_radial = RadialOutcome::completed;
  double t_2d = 0.0;
  double t_radial = 0.0;
  double blowup_discrepancy = 0.0;  // |t_2d - t_radial| / t_radial when both blow up
  double mass_tolerance = 0.03;
  double time_tolerance = 0.1;

  bool both_blow_up() const { return outcome_2d == Outcome::blowup && outcome_radial == RadialOutcome::blowup; }
  bool pass() const;
};

CrossCheckReport cross_check_2d(const CrossCheckSetup& setup);

/// Compares an existing 2D trajectory of the setup's data against a fresh radial run;
/// the trajectory must hold snapshots at the compare times it reached.
CrossCheckReport compare_to_radial(const Trajectory& traj, const CrossCheckSetup& setup);

}  // namespace ksl
