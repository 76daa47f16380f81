#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "ksl/cross_check.hpp"
#include "ksl/errors.hpp"
#include "ksl/evolution.hpp"
#include "ksl/heat.hpp"

using namespace ksl;
constexpr double kPi = std::numbers::pi;

namespace {

Field random_bumps(const GridSpec& g, std::uint64_t seed, double total_mass) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-2.0, 2.0), width(0.7, 1.0), share(0.2, 1.0);
  Field f(g);
  for (int k = 0; k < 3; ++k) f += gaussian_bump(g, {pos(rng), pos(rng)}, share(rng), width(rng));
  f *= total_mass / f.mass();
  return f;
}

SimConfig config(Field u0, double t_end, double record_every) {
  SimConfig c{.initial = std::move(u0)};
  c.t_end = t_end;
  c.record_every = record_every;
  c.blowup_cap = 1e4;
  c.backend = PoissonBackend::free_space;
  return c;
}

double asymmetry(const Field& u) {
  // L2 distance between u and its images under x -> -x, x <-> y
  const GridSpec& g = u.grid();
  const int n = g.n();
  double d = 0.0, s = 0.0;
  for (int j = 1; j < n; ++j)
    for (int i = 1; i < n; ++i) {
      const double a = u(i, j);
      d = std::max({d, std::abs(a - u(n - i, j)), std::abs(a - u(i, n - j)), std::abs(a - u(j, i))});
      s = std::max(s, std::abs(a));
    }
  return s > 0.0 ? d / s : d;
}

}  // namespace

TEST_CASE("zero coupling reproduces the heat flow") {
  const GridSpec g = make_grid(16.0, 64);
  SimConfig c = config(random_bumps(g, 3, 2.0 * kPi), 0.5, 0.1);
  c.zero_coupling = true;
  const Trajectory traj = run(c);
  REQUIRE(traj.outcome == Outcome::completed);
  for (std::size_t k = 0; k < traj.times.size(); ++k)
    CHECK(relative_l1(traj.snapshots[k], heat_evolve(c.initial, traj.times[k])) < 1e-6);
}

TEST_CASE("mass conservation and positivity along runs") {
  const GridSpec g = make_grid(16.0, 64);
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    for (TimeOrder order : {TimeOrder::lie, TimeOrder::heun}) {
      SimConfig c = config(random_bumps(g, seed, 5.0 * kPi), 0.3, 0.1);
      c.order = order;
      const Trajectory traj = run(c);
      CHECK(traj.max_mass_drift() < 1e-6);
      CHECK(traj.cumulative_clipped < 1e-6 * traj.initial_mass());
      for (const Field& u : traj.snapshots) CHECK(u.min() >= 0.0);
      for (std::size_t k = 1; k < traj.times.size(); ++k) CHECK(traj.times[k] > traj.times[k - 1]);
    }
  }
}

TEST_CASE("transport conserves mass for every reconstruction") {
  const GridSpec g = make_grid(16.0, 64);
  const Field u = random_bumps(g, 8, 6.0 * kPi);
  const VectorField grad = freespace_gradient(u);
  const double dt = stable_dt(grad, 0.4);
  for (AdvectionScheme s : {AdvectionScheme::upwind, AdvectionScheme::muscl, AdvectionScheme::central, AdvectionScheme::quick}) {
    const Field moved = transport(u, grad, dt, s);
    CHECK(std::abs(moved.mass() - u.mass()) < 1e-12 * u.mass());
    CHECK(moved.min() >= 0.0);
    CHECK(parse_scheme(to_string(s)) == s);
  }
  CHECK_THROWS_AS(parse_scheme("weno"), ConfigError);
  CHECK(parse_time_order(to_string(TimeOrder::lie)) == TimeOrder::lie);
}

TEST_CASE("step size limit") {
  const GridSpec g = make_grid(16.0, 64);
  VectorField grad(g);
  for (double& v : grad.x) v = 2.0;
  for (double& v : grad.y) v = -1.0;
  const double dx = g.dx(), cfl = 0.4;
  CHECK(stable_dt(grad, cfl) == doctest::Approx(std::min(cfl * dx / (2.0 * 3.0), 4.0 * cfl * dx * dx)));
  CHECK(stable_dt(VectorField(g), cfl) == doctest::Approx(4.0 * cfl * dx * dx));

  const Field u = gaussian_bump(g, {}, 8.0 * kPi, 1.0);
  const double limit = stable_dt(freespace_gradient(u), cfl);
  StepOptions opt;
  opt.backend = PoissonBackend::free_space;
  CHECK_THROWS_AS(step(u, 1.5 * limit, opt), StepRefused);
  CHECK_NOTHROW(step(u, limit, opt));
}

TEST_CASE("configuration checks") {
  const GridSpec g = make_grid(16.0, 64);
  SimConfig c = config(gaussian_bump(g, {}, 1.0, 1.0), 1.0, 0.1);
  CHECK_NOTHROW(c.validate());
  c.blowup_cap = 5.0 * c.initial.max();
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = config(gaussian_bump(g, {}, 1.0, 1.0), 1.0, 0.1);
  c.cfl = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.cfl = 0.4;
  c.dt_min = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.dt_min = 1e-9;
  c.initial(3, 3) = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("zero stays zero") {
  const GridSpec g = make_grid(8.0, 32);
  const StepResult r = step(Field(g), 1e-3);
  CHECK(r.u.max() == 0.0);
  CHECK(r.u.min() == 0.0);
}

TEST_CASE("radial symmetry is preserved by a step") {
  const GridSpec g = make_grid(16.0, 128);
  const Field u = gaussian_bump(g, {}, 6.0 * kPi, 1.0);
  StepOptions opt;
  opt.backend = PoissonBackend::free_space;
  for (AdvectionScheme s : {AdvectionScheme::upwind, AdvectionScheme::central}) {
    opt.scheme = s;
    const double dt = stable_dt(freespace_gradient(u), opt.cfl);
    CHECK(asymmetry(step(u, dt, opt).u) < 1e-8);
  }
}

TEST_CASE("small mass: a step lowers the peak and tracks the heat flow") {
  const GridSpec g = make_grid(16.0, 128);
  StepOptions opt;
  opt.backend = PoissonBackend::free_space;
  double previous_gap = 0.0;
  for (double M : {kPi, kPi / 4.0}) {
    const Field u = gaussian_bump(g, {}, M, 1.0);
    const double dt = 0.01;
    const Field next = step(u, dt, opt).u;
    CHECK(next.max() < u.max());
    // the drift is O(M) relative to diffusion
    const double gap = relative_l1(next, heat_evolve(u, dt));
    if (previous_gap > 0.0) CHECK(gap == doctest::Approx(previous_gap / 4.0).epsilon(0.1));
    previous_gap = gap;
  }
}

TEST_CASE("subcritical mass spreads") {
  const GridSpec g = make_grid(16.0, 128);
  const Trajectory traj = run(config(gaussian_bump(g, {}, 4.0 * kPi, 1.0), 2.0, 0.5));
  REQUIRE(traj.outcome == Outcome::completed);
  CHECK(traj.snapshots.back().max() < traj.snapshots.front().max());
  CHECK(traj.max_mass_drift() < 1e-6);
}

TEST_CASE("supercritical gaussian blows up near the radial time") {
  CrossCheckSetup setup;
  setup.mass = 12.0 * kPi;
  setup.n = 256;
  setup.t_end = 1.0;
  setup.blowup_cap = 120.0;
  const CrossCheckReport r = cross_check_2d(setup);
  REQUIRE(r.both_blow_up());
  CHECK(r.blowup_discrepancy < 0.1);
}

TEST_CASE("consistency under refinement") {
  // errors against a fine reference, compared on the coarse nodes
  const double t = 0.05, M = 4.0 * kPi;
  auto solve = [&](int n) {
    const Trajectory tr = run(config(gaussian_bump(make_grid(8.0, n), {}, M, 0.6), t, t));
    return tr.snapshots.back();
  };
  const Field ref = solve(256);
  auto error = [&](const Field& u) {
    const int stride = ref.grid().n() / u.grid().n();
    double num = 0.0, den = 0.0;
    for (int j = 0; j < u.grid().n(); ++j)
      for (int i = 0; i < u.grid().n(); ++i) {
        num += std::abs(u(i, j) - ref(stride * i, stride * j));
        den += std::abs(ref(stride * i, stride * j));
      }
    return num / den;
  };
  const double e32 = error(solve(32)), e64 = error(solve(64));
  MESSAGE("refinement errors " << e32 << " " << e64);
  CHECK(e32 / e64 >= 1.8);
}

TEST_CASE("parabolic scaling") {
  const GridSpec g = make_grid(16.0, 128);
  SimConfig c = config(gaussian_bump(g, {}, 4.0 * kPi, 1.0), 0.25, 0.25);
  CHECK(scaling_equivariance_check(c, 1.0, {0.25}) < 1e-12);
  c.t_end = 1.0;
  c.record_every = 1.0;
  CHECK(scaling_equivariance_check(c, 2.0, {0.25}) < 1e-2);
}

TEST_CASE("step log csv") {
  const GridSpec g = make_grid(8.0, 32);
  const Trajectory traj = run(config(gaussian_bump(g, {}, 1.0, 0.6), 0.05, 0.05));
  const auto path = std::filesystem::temp_directory_path() / "ksl_step_log_test.csv";
  write_step_log_csv(path, traj);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,dt,mass,sup_norm,clipped_mass");
  std::filesystem::remove(path);
  CHECK_THROWS_AS(traj.at(0.0123), UsageError);
  CHECK(traj.at(0.05).mass() == doctest::Approx(1.0).epsilon(1e-6));
}
