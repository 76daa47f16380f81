#include "ksl/cross_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ksl/moment.hpp"

namespace ksl {

bool CrossCheckReport::pass() const {
  if (outcome_2d != Outcome::blowup && outcome_radial == RadialOutcome::blowup) return false;
  if (outcome_2d == Outcome::blowup && outcome_radial != RadialOutcome::blowup) return false;
  if (both_blow_up()) return blowup_discrepancy < time_tolerance;
  return max_discrepancy < mass_tolerance;
}

namespace {

std::vector<double> compare_times_of(const CrossCheckSetup& setup) {
  return setup.compare_times.empty() ? std::vector<double>{setup.t_end} : setup.compare_times;
}

}  // namespace

CrossCheckReport cross_check_2d(const CrossCheckSetup& setup) {
  const GridSpec grid = make_grid(setup.box_length, setup.n);
  SimConfig config{.initial = gaussian_bump(grid, {}, setup.mass, setup.width)};
  config.t_end = setup.t_end;
  config.record_every = setup.t_end;
  config.extra_record_times = compare_times_of(setup);
  config.blowup_cap = setup.blowup_cap > 0 ? setup.blowup_cap : std::numeric_limits<double>::infinity();
  config.backend = setup.backend;
  return compare_to_radial(run(config), setup);
}

CrossCheckReport compare_to_radial(const Trajectory& traj, const CrossCheckSetup& setup) {
  const GridSpec& grid = traj.snapshots.front().grid();
  const std::vector<double> times = compare_times_of(setup);
  std::vector<double> radii = setup.radii;
  if (radii.empty()) {
    const double lo = 4.0 * grid.dx();
    const double hi = grid.box_length() / 4.0;
    for (int k = 0; k < 8; ++k) radii.push_back(lo * std::pow(hi / lo, k / 7.0));
  }

  RadialRunOptions opt;
  opt.cap = setup.blowup_cap > 0 ? setup.blowup_cap : std::numeric_limits<double>::infinity();
  opt.record_every = setup.t_end;
  opt.extra_record_times = times;
  const RadialRun radial = radial_run(radial_gaussian(setup.radial_grid, setup.mass, setup.width), setup.t_end, opt);
  CrossCheckReport report;
  report.outcome_2d = traj.outcome;
  report.outcome_radial = radial.outcome;
  report.t_2d = traj.t_outcome;
  report.t_radial = radial.t_end;
  if (report.both_blow_up()) report.blowup_discrepancy = std::abs(report.t_2d - report.t_radial) / report.t_radial;

  // m(r) is compared only where both solvers reached the time.
  const double horizon = std::min(traj.t_outcome, radial.t_end);
  for (double t : times) {
    if (t > horizon) continue;
    const Field& u = traj.at(t);
    const RadialState& s = radial.at(t);
    for (double r : radii) {
      const double m2 = ball_mass(u, {}, r);
      const double mr = s.mass_within(r);
      const double scale = std::max(std::abs(mr), std::abs(m2));
      const double d = scale == 0.0 ? 0.0 : std::abs(m2 - mr) / std::max(std::abs(mr), 1e-300);
      report.rows.push_back({t, r, m2, mr, d});
      report.max_discrepancy = std::max(report.max_discrepancy, d);
    }
  }
  return report;
}

}  // namespace ksl
