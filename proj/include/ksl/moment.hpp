#pragma once

// Localized moments Lambda(t) = int psi((x - x0)/R) u(x,t) dx with
// psi(x) = (1 - |x|^2)_+^2, their time derivative, ball masses and the
// localization lemmas evaluated as measured verdicts.

#include <cstdint>
#include <numbers>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ksl/evolution.hpp"
#include "ksl/field.hpp"
#include "ksl/heat.hpp"

namespace ksl {

// Unit-radius weight and its derivatives.
double psi_unit(double r2);
Point psi_unit_gradient(Point x);
double psi_unit_laplacian(double r2);

struct WeightPsi {
  Point center;
  double radius = 1.0;
  double lipschitz_B = 0.0;  // measured |grad psi(x) - grad psi(y)| <= B|x - y|, unit-R form
  double improved_rho = 0.5;
  double improved_B = 0.0;   // measured |grad psi(x) - grad psi(y) + 4(x - y)| <= B|x - y| on |x|,|y| <= rho

  double value(Point x) const;
  Point gradient(Point x) const;
  double laplacian(Point x) const;
  /// Average of Lap psi over the square cell of side h centred at x. Lap psi jumps
  /// from 8/R^2 to 0 across the sphere, where point sampling is first order.
  double cell_laplacian(Point x, double h) const;
};

/// Throws ResolutionError if R < 6 dx and DomainError if the ball leaves the box.
WeightPsi build_psi(const GridSpec& grid, Point center, double radius, double improved_rho = 0.5);

/// Lipschitz constant of grad psi over unit-form pairs with |x|,|y| <= reach:
/// the larger of the sampled Hessian operator norm and the sampled pair ratio.
double measure_gradient_lipschitz(double reach, bool subtract_core, std::uint64_t seed, std::size_t pairs);

double local_moment(const Field& u, const WeightPsi& psi);

struct MomentDerivative {
  double linear = 0.0;        // int u Lap psi
  double bilinear = 0.0;      // -(1/4pi) double integral, diagonal cells included
  double diagonal = 0.0;      // part of `bilinear` from coincident cells
  double total = 0.0;
  std::size_t pairs = 0;      // ordered pairs evaluated
  bool subsampled = false;
  double monte_carlo_error = 0.0;  // one standard deviation of `bilinear` when subsampled
};

/// How the pairs with one point outside the probe ball are summed once their count exceeds the budget:
/// `exact` evaluates the same discrete sum as a zero-padded FFT convolution, `subsample` keeps a seeded
/// Bernoulli sample and reports its standard deviation.
enum class FarField { exact, subsample };

std::string_view to_string(FarField f);
FarField parse_far_field(std::string_view s);

/// Pair sum over cells with u > 1e-12 sup u and at least one point in the probe ball.
MomentDerivative moment_derivative_formula(const Field& u, const WeightPsi& psi, std::size_t max_pairs = 10'000'000,
                                           FarField far = FarField::exact, std::uint64_t seed = 1);

/// Same quantity as int u Lap psi + int u grad v . grad psi with a spectral chemo solve.
double moment_derivative_spectral(const Field& u, const WeightPsi& psi, PoissonBackend backend);

/// Upper envelope 8M/R^2 + M^2/(pi R^2).
double moment_derivative_envelope(double mass, double radius);

struct SlidingMass {
  double value = 0.0;
  Point argmax;
};

/// sup_x int_{B(x,r)} u, with cell-area-weighted disc fractions. Throws ResolutionError if r < 3 dx.
SlidingMass sliding_ball_mass(const Field& u, double r);

/// int_{B(center,r)} u with cell-area-weighted fractions.
double ball_mass(const Field& u, Point center, double r);

/// Fraction of the square cell centred at `c` with side h lying in B(0, r).
double disc_cell_fraction(Point c, double h, double r);

struct LocalizationParams {
  double eps0 = std::numbers::pi;
  double m0 = 0.5;
  double m = 7.0 * std::numbers::pi;
  double rho = 0.5;
  double delta = 0.5;
  double H0 = 0.0;
  double H1 = 0.0;
  double theta = 0.0;  // measured per run
  double R0 = 0.0;
  double A0 = 0.0;     // measured per run
  double rho1 = 0.5;
  double beta = 0.0;
  bool h0_identity_exact = false;

  void validate() const;  // throws ConfigError
};

/// Fills H0 from the proof identity (checked in exact rational arithmetic), H1 = H0 at delta/2,
/// R0 = 6*128*pi*M/eps0 and beta = sqrt(H1)/2.
LocalizationParams make_localization_params(double total_mass, double eps0, double m0, double m, double rho,
                                            double delta, double rho1 = 0.5);

/// Exact check of 1 - H0 = (1-rho^2)^2 + (1 - (1-rho^2)^2)(1 - delta) against H0 = delta(1 - (1-rho^2)^2).
bool h0_identity_holds(double rho, double delta);

enum class L0Part { i, ii, iii };

struct L0Verdict {
  L0Part part;
  double ball_mass = 0.0;    // int_{B(R)} w
  double inner_mass = 0.0;   // int_{B(rho R)} w, or int_{B(beta R)} w for (iii)
  double psi_moment = 0.0;   // int psi w
  bool hypothesis = false;
  bool conclusion = false;
  bool holds = true;         // hypothesis implies conclusion
};

/// Ball integrals use cell-centre membership so the discrete implications are exact.
L0Verdict lemma_L0_check(const Field& w, const LocalizationParams& params, L0Part part, Point center = {},
                         double radius = 1.0);

struct Probe {
  Point center;
  double radius = 1.0;
};

struct ProbeSample {
  double t = 0.0;
  double lambda = 0.0;
  double derivative = 0.0;  // formula
  double inner_mass = 0.0;  // int_{B(x0, rho R)} u
  double sliding = 0.0;     // sup ball mass at radius R
  double far_sliding = 0.0; // sup ball mass at radius R0 R (the total mass once that ball covers the box)
  bool hypothesis = false;  // far_sliding <= m and inner_mass >= (1 - delta) m
  std::vector<double> cascade_mass;  // int_{B(x0, rho1^j R)} u, j = 1..
};

struct CascadeLevel {
  int j = 0;
  double radius = 0.0;
  double bound = 0.0;     // (1 - H1)^j m
  double t_from = 0.0;    // A0 R^2 (1 + rho1 + ... + rho1^{j-1})
  bool checked = false;   // some snapshot at or after t_from
  bool pass = true;
};

struct ProbeReport {
  Probe probe;
  std::vector<ProbeSample> samples;
  std::vector<double> derivative_fd;  // per interval
  bool hypothesis_ever = false;
  double first_sliding_violation = -1.0;  // first t with sliding mass > m; -1 if none
  double theta_measured = 0.0;
  double A0 = 0.0;
  bool l1_pass = true;   // Lambda' <= 0 whenever the hypothesis holds
  bool l3_pass = true;   // inner mass <= (1 - H1) m for t >= A0 R^2
  std::vector<CascadeLevel> cascade;
  bool inconclusive = false;
  bool envelope_pass = true;
  double worst_envelope_ratio = 0.0;  // max of Lambda' / envelope

  bool pass() const;
};

struct LocalizationReport {
  std::vector<ProbeReport> probes;
  bool pass() const;
};

LocalizationReport monitor_localization(const Trajectory& traj, const LocalizationParams& params,
                                        const std::vector<Probe>& probes, FarField far = FarField::exact,
                                        std::uint64_t seed = 1);

struct MomentSeries {
  WeightPsi probe;
  std::vector<double> t;
  std::vector<double> lambda;
  std::vector<double> formula;
  std::vector<double> fd;  // (Lambda_{k+1} - Lambda_k) / dt_k

  /// Max over intervals of |fd - mean of endpoint formulas| / max |fd|.
  double fd_relative_error() const;
  /// Max over intervals of |Lambda_{k+1} - Lambda_0 - trapezoid integral of the formula|.
  double integration_defect() const;
};

MomentSeries moment_series(const Trajectory& traj, const WeightPsi& psi, FarField far = FarField::exact,
                           std::uint64_t seed = 1);

/// Max over intervals of |fd_k - (formula_k + formula_{k+1}) / 2| / max |fd|.
double fd_relative_error(const std::vector<double>& formula, const std::vector<double>& fd);

/// t^{1-1/p} ||u(t)||_p over the recorded snapshots with t > 0.
HyperNormRecord hyper_norm_series(const Trajectory& traj, double p);

void write_moment_csv(const std::filesystem::path& path, const ProbeReport& report, const LocalizationParams& params);

}  // namespace ksl
