#pragma once

// Radially symmetric reduction in the cumulative mass m(r,t) = int_{B(r)} u:
//
//   m_t = m_rr - m_r / r + m m_r / (2 pi r).
//
// Discretized on a geometric grid r = e^s, where the equation reads
// m_t = e^{-2s} (m_ss - 2 m_s + m m_s / (2 pi)); central differences in s,
// backward Euler in time with Newton iteration. Inner boundary m_s = 2m
// (locally constant density), outer boundary m(r_max) = M.

#include <filesystem>
#include <optional>
#include <vector>

namespace ksl {

struct RadialGrid {
  double r_min = 1e-6;
  double r_max = 100.0;
  int nodes_per_efold = 32;
};

struct RadialState {
  std::vector<double> r;
  std::vector<double> m;
  double h = 0.0;  // spacing in log r
  double t = 0.0;

  double total_mass() const { return m.back(); }
  /// max_i m_i / (pi r_i^2), a proxy for the central density.
  double central_density() const;
  /// m at radius r, linear in log r; 0 below r_min, M above r_max.
  double mass_within(double r) const;
};

/// m(r) = M (1 - exp(-r^2 / 2 s^2)): a 2D Gaussian of mass M and width s.
RadialState radial_gaussian(const RadialGrid& grid, double mass, double width);
/// From an explicit cumulative-mass profile m(r).
template <class Profile>
RadialState radial_from_mass(const RadialGrid& grid, Profile&& m_of_r);
RadialState make_radial_nodes(const RadialGrid& grid);

/// Spatial operator e^{-2s}(m_ss - 2 m_s + m m_s / 2pi) at interior nodes.
std::vector<double> radial_operator(const RadialState& s);

struct RadialStepResult {
  RadialState state;
  double dt_taken = 0.0;
  bool underflow = false;  // no convergent step above dt_min
};

/// Backward-Euler step; on Newton failure dt is halved until dt_min.
RadialStepResult radial_step(const RadialState& s, double dt, double dt_min = 1e-14);

enum class RadialOutcome { completed, blowup };

struct RadialSample {
  double t;
  double central_density;
  std::vector<double> ladder_mass;  // at kRadialLadder
};

inline const std::vector<double> kRadialLadder = {1e-3, 1e-2, 1e-1, 1.0};

struct CapCrossing {
  double cap;
  double t;
  std::vector<double> ladder_mass;
};

struct RadialRunOptions {
  double cap = 1e4;  // central-density threshold for blow-up
  std::vector<double> intermediate_caps;  // crossings recorded, run continues
  double dt_initial = 1e-5;
  double dt_max = 2e-3;
  double dt_min = 1e-14;
  double target_change = 0.05;  // per-step change of log central density
  double record_every = 0.05;
  std::vector<double> extra_record_times;
};

struct RadialRun {
  RadialOutcome outcome = RadialOutcome::completed;
  double t_end = 0.0;       // final time or detection time
  double m_core = 0.0;      // mass at the innermost ladder radius at detection
  std::vector<RadialSample> samples;
  std::vector<RadialState> snapshots;  // at record times
  std::vector<CapCrossing> crossings;
  double max_mass_drift = 0.0;

  const RadialState& at(double t) const;
};

RadialRun radial_run(const RadialState& initial, double t_end, const RadialRunOptions& opt = {});

void write_radial_csv(const std::filesystem::path& path, const RadialRun& run);

// --- implementation of the template ---
template <class Profile>
RadialState radial_from_mass(const RadialGrid& grid, Profile&& m_of_r) {
  RadialState s = make_radial_nodes(grid);
  for (std::size_t i = 0; i < s.r.size(); ++i) s.m[i] = m_of_r(s.r[i]);
  return s;
}

}  // namespace ksl
