#pragma once

// Time integration of u_t = Lap u - div(u grad v), Lap v + u = 0.
//
// Diffusion is applied exactly in spectral space and the drift flux u grad v by
// an explicit finite-volume update on cell faces, with grad v re-solved from the
// current density at every transport stage. The default step is Heun's method
// with the heat flow as integrating factor. Both parts
// conserve mass; negative values left by the spectral stage are clipped and
// accounted for.

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "ksl/field.hpp"
#include "ksl/poisson.hpp"

namespace ksl {

enum class AdvectionScheme {
  upwind,  // first-order donor cell
  muscl,   // donor cell with minmod-limited linear reconstruction
  central,  // central-slope reconstruction limited only by face positivity
  quick,    // quadratic upstream interpolation (6 u_C + 3 u_D - u_U) / 8, clipped to [0, 2 u_C]
};

std::string_view to_string(AdvectionScheme s);
AdvectionScheme parse_scheme(std::string_view s);

enum class TimeOrder {
  lie,     // transport with the drift of u, then heat; first order
  heun,    // Heun's method in the frame moving with the heat flow; second order
};

std::string_view to_string(TimeOrder o);
TimeOrder parse_time_order(std::string_view s);

struct StepOptions {
  double cfl = 0.4;
  PoissonBackend backend = PoissonBackend::periodic_spectral;
  AdvectionScheme scheme = AdvectionScheme::central;
  TimeOrder order = TimeOrder::heun;
};

struct StepResult {
  Field u;
  double clipped_mass = 0.0;
};

/// Largest admissible step: min(cfl dx / (2 (max|v_x| + max|v_y|)), 4 cfl dx^2).
double stable_dt(const VectorField& grad_v, double cfl);

/// Throws StepRefused when dt exceeds stable_dt.
StepResult step(const Field& u, double dt, const StepOptions& opt = {});

/// Explicit finite-volume transport u - dt div(u grad v); no heat, no clipping.
Field transport(const Field& u, const VectorField& grad_v, double dt, AdvectionScheme scheme);

/// Lie step with a precomputed drift; no step-size check.
StepResult advance(const Field& u, const VectorField& grad_v, double dt, AdvectionScheme scheme);

/// Second-order step: u1 = H(dt)(u + dt T(u)), u_next = (H(dt)u + u1 + dt T(u1)) / 2 with
/// H the heat semigroup and T the transport operator; grad_v is the drift of u.
StepResult advance_heun(const Field& u, const VectorField& grad_v, double dt, AdvectionScheme scheme,
                        PoissonBackend backend);

/// Drift-free variant used for the zero-coupling limit.
inline StepResult advance_heat_only(const Field& u, double dt) {
  return advance(u, VectorField(u.grid()), dt, AdvectionScheme::upwind);
}

struct SimConfig {
  Field initial;
  double t_end = 1.0;
  double cfl = 0.4;
  double dt_min = 1e-9;
  double blowup_cap = 0.0;  // sup-norm threshold; must exceed 10x the initial sup
  double record_every = 0.1;
  std::vector<double> extra_record_times;
  PoissonBackend backend = PoissonBackend::periodic_spectral;
  AdvectionScheme scheme = AdvectionScheme::central;
  TimeOrder order = TimeOrder::heun;
  bool zero_coupling = false;  // drift forced to zero

  const GridSpec& grid() const { return initial.grid(); }
  void validate() const;  // throws ConfigError
};

enum class Outcome { completed, blowup, dt_underflow };
std::string_view to_string(Outcome o);

struct StepLogEntry {
  double t;
  double dt;
  double mass;
  double sup_norm;
  double clipped_mass;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Field> snapshots;
  std::vector<StepLogEntry> step_log;
  Outcome outcome = Outcome::completed;
  double t_outcome = 0.0;  // t_end, t_detect, or the underflow time
  double cumulative_clipped = 0.0;

  double initial_mass() const { return snapshots.front().mass(); }
  /// Max relative mass drift over all recorded steps.
  double max_mass_drift() const;
  /// Snapshot recorded at time t (exact match within 1e-12); throws UsageError otherwise.
  const Field& at(double t) const;
};

struct IntegrationFault : std::runtime_error {
  IntegrationFault(const std::string& what, Trajectory partial)
      : std::runtime_error(what), partial(std::move(partial)) {}
  Trajectory partial;
};

Trajectory run(const SimConfig& config);

/// Where the rescaled run lives: the base grid, or a box shrunk by lambda with the
/// same node count, which keeps the resolution relative to the solution fixed.
enum class ScalingGrid { same, zoomed };

/// Runs u from the base initial data and w from rescale_field(u0, lambda) and returns the largest relative L1 gap between
/// rescale_field(u(lambda^2 t), lambda) and w(t) over compare_times.
double scaling_equivariance_check(const SimConfig& config, double lambda, const std::vector<double>& compare_times,
                                  ScalingGrid where = ScalingGrid::same);

struct BlowupScaling {
  Trajectory base;
  Trajectory scaled;
  double relative_error = 0.0;  // |lambda^2 t_scaled - t_base| / t_base
};

/// Blow-up times of u0 and its lambda-rescaling; caps and step floors are scaled consistently.
BlowupScaling blowup_time_scaling(const SimConfig& config, double lambda, ScalingGrid where = ScalingGrid::zoomed);

/// Relative L1 distance ||a - b||_1 / ||b||_1.
double relative_l1(const Field& a, const Field& b);

void write_step_log_csv(const std::filesystem::path& path, const Trajectory& traj);

}  // namespace ksl
