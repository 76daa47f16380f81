#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

#include "ksl/errors.hpp"
#include "ksl/evolution.hpp"
#include "ksl/moment.hpp"

using namespace ksl;
constexpr double kPi = std::numbers::pi;

namespace {

Field random_bumps(const GridSpec& g, std::uint64_t seed, double spread, double total_mass) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-spread, spread), width(0.4, 0.8), share(0.2, 1.0);
  Field f(g);
  for (int k = 0; k < 3; ++k) f += gaussian_bump(g, {pos(rng), pos(rng)}, share(rng), width(rng));
  f *= total_mass / f.mass();
  return f;
}

Trajectory zero_trajectory(const GridSpec& g) {
  Trajectory t;
  for (double s : {0.0, 0.1, 0.2}) {
    t.times.push_back(s);
    t.snapshots.push_back(Field(g));
    t.step_log.push_back({s, 0.1, 0.0, 0.0, 0.0});
  }
  t.t_outcome = 0.2;
  return t;
}

SimConfig gaussian_run(const GridSpec& g, double mass, double t_end, double record_every) {
  SimConfig c{.initial = gaussian_bump(g, {}, mass, 1.0)};
  c.t_end = t_end;
  c.record_every = record_every;
  c.blowup_cap = 120.0;
  c.backend = PoissonBackend::free_space;
  return c;
}

}  // namespace

TEST_CASE("weight psi") {
  const GridSpec g = make_grid(16.0, 128);
  const WeightPsi psi = build_psi(g, {1.0, -0.5}, 2.0);
  CHECK(psi.value(psi.center) == 1.0);
  CHECK(psi.laplacian(psi.center) == doctest::Approx(-8.0 / 4.0).epsilon(1e-12));
  double min_lap = 0.0;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pos(-3.0, 3.0);
  for (int k = 0; k < 20000; ++k) {
    const Point x{psi.center.x + pos(rng), psi.center.y + pos(rng)};
    const double d2 = std::pow(x.x - psi.center.x, 2) + std::pow(x.y - psi.center.y, 2);
    const double v = psi.value(x);
    CHECK(v >= 0.0);
    if (d2 > 4.0) CHECK(v == 0.0);
    CHECK(std::abs(v - 1.0) <= 2.0 * d2 / 4.0 + 1e-15);
    min_lap = std::min(min_lap, psi.laplacian(x));
  }
  CHECK(min_lap >= -2.0 - 1e-8);
  for (int j = 0; j < g.n(); ++j)
    for (int i = 0; i < g.n(); ++i) CHECK(psi.laplacian({g.coord(i), g.coord(j)}) >= -2.0 - 1e-8);

  CHECK_THROWS_AS(build_psi(g, {}, 0.5), ResolutionError);
  CHECK_THROWS_AS(build_psi(g, {7.0, 0.0}, 2.0), DomainError);
}

TEST_CASE("measured gradient lipschitz constant") {
  const WeightPsi psi = build_psi(make_grid(16.0, 128), {}, 1.0);
  CHECK(psi.lipschitz_B >= 4.0);
  CHECK(psi.lipschitz_B <= 16.0);
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> pos(-1.5, 1.5);
  double worst = 0.0;
  for (int k = 0; k < 1'000'000; ++k) {
    const Point x{pos(rng), pos(rng)}, y{pos(rng), pos(rng)};
    const Point gx = psi_unit_gradient(x), gy = psi_unit_gradient(y);
    const double d = std::hypot(x.x - y.x, x.y - y.y);
    if (d > 0.0) worst = std::max(worst, std::hypot(gx.x - gy.x, gx.y - gy.y) / d);
  }
  CHECK(worst <= psi.lipschitz_B * (1.0 + 1e-12));
  // the core-subtracted constant on the inner ball is 12 rho^2
  CHECK(psi.improved_B == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("local moments") {
  const GridSpec g = make_grid(16.0, 256);
  const WeightPsi psi = build_psi(g, {}, 2.0);
  CHECK(local_moment(Field(g), psi) == 0.0);

  // E (1 - r^2/R^2)^2 for a gaussian of width s: 1 - 4 s^2/R^2 + 8 s^4/R^4 up to exp(-R^2 / 2 s^2)
  const double m = 3.0, s = 0.3, R = 2.0;
  const double lam = local_moment(gaussian_bump(g, {}, m, s), psi);
  CHECK(lam == doctest::Approx(m * (1.0 - 4.0 * s * s / (R * R) + 8.0 * std::pow(s / R, 4))).epsilon(1e-6));
  CHECK(std::abs(lam - m) <= 2.0 * m * 2.0 * s * s / (R * R));

  CHECK(std::abs(local_moment(gaussian_bump(g, {5.0, 0.0}, m, 0.4), psi)) < 1e-12);
}

TEST_CASE("small-mass limit of the moment derivative") {
  const GridSpec g = make_grid(16.0, 256);
  const double R = 2.0, s = 0.3;
  const WeightPsi psi = build_psi(g, {}, R);
  // int G Lap psi = (16 E|x|^2 / R^2 - 8) / R^2 with E|x|^2 = 2 s^2
  const double linear_unit = (32.0 * s * s / (R * R) - 8.0) / (R * R);
  for (double M : {1e-3, 1e-2}) {
    const MomentDerivative d = moment_derivative_formula(gaussian_bump(g, {}, M, s), psi);
    CHECK(d.linear / M == doctest::Approx(linear_unit).epsilon(1e-3));
    CHECK(std::abs(d.bilinear) < M * M);
    CHECK(d.total / M == doctest::Approx(linear_unit).epsilon(0.01));
  }
  CHECK(linear_unit == doctest::Approx(-8.0 / (R * R)).epsilon(0.1));
}

TEST_CASE("exact far field equals the direct pair sum") {
  const GridSpec g = make_grid(16.0, 128);
  const Field u = random_bumps(g, 4, 1.0, 5.0);
  const WeightPsi psi = build_psi(g, {0.5, 0.0}, 1.0);
  const MomentDerivative direct = moment_derivative_formula(u, psi, std::numeric_limits<std::size_t>::max());
  CHECK_FALSE(direct.subsampled);
  const MomentDerivative exact = moment_derivative_formula(u, psi, 1000, FarField::exact);
  CHECK(exact.total == doctest::Approx(direct.total).epsilon(1e-10));
  const MomentDerivative sampled = moment_derivative_formula(u, psi, 200'000, FarField::subsample, 5);
  CHECK(sampled.subsampled);
  CHECK(sampled.monte_carlo_error > 0.0);
  CHECK(std::abs(sampled.bilinear - direct.bilinear) < 5.0 * sampled.monte_carlo_error);
  CHECK(parse_far_field(to_string(FarField::subsample)) == FarField::subsample);
  CHECK_THROWS_AS(parse_far_field("multipole"), ConfigError);
}

TEST_CASE("formula agrees with the spectral evaluation") {
  const GridSpec g = make_grid(16.0, 256);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const Field u = random_bumps(g, seed, 1.5, 4.0 * kPi);
    const WeightPsi psi = build_psi(g, {0.3, -0.2}, 1.5);
    const double formula = moment_derivative_formula(u, psi).total;
    const double spectral = moment_derivative_spectral(u, psi, PoissonBackend::free_space);
    CHECK(formula == doctest::Approx(spectral).epsilon(1e-2));
  }
}

TEST_CASE("moment derivative stays below the envelope") {
  const GridSpec g = make_grid(16.0, 128);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> centre(-2.0, 2.0), radius(0.8, 3.0), mass(0.5, 12.0 * kPi);
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const Field u = random_bumps(g, seed, 2.0, mass(rng));
    const WeightPsi psi = build_psi(g, {centre(rng), centre(rng)}, radius(rng));
    CHECK(moment_derivative_formula(u, psi).total <= moment_derivative_envelope(u.mass(), psi.radius));
  }
}

TEST_CASE("sliding ball masses") {
  const GridSpec g = make_grid(16.0, 256);
  const double r = 1.5, s = 0.3, M = 5.0;
  const SlidingMass one = sliding_ball_mass(gaussian_bump(g, {0.7, -1.1}, M, s), r);
  CHECK(one.value == doctest::Approx(M * (1.0 - std::exp(-r * r / (2.0 * s * s)))).epsilon(0.01));
  CHECK(std::abs(one.argmax.x - 0.7) <= 0.5 * g.dx());
  CHECK(std::abs(one.argmax.y + 1.1) <= 0.5 * g.dx());

  Field uniform(g);
  for (double& v : uniform.values()) v = 0.25;
  CHECK(sliding_ball_mass(uniform, r).value == doctest::Approx(0.25 * kPi * r * r).epsilon(0.01));

  const Field pair = gaussian_bump(g, {-3.0, 0.0}, 6.0 * kPi, s) + gaussian_bump(g, {3.0, 0.0}, 6.0 * kPi, s);
  const double two = sliding_ball_mass(pair, 1.0).value;
  CHECK(two == doctest::Approx(6.0 * kPi).epsilon(0.01));
  CHECK(two < 8.0 * kPi);

  const Field u = random_bumps(g, 3, 2.0, 10.0);
  double previous = 0.0;
  for (double rr = 0.4; rr < 6.0; rr *= 1.3) {
    const double v = sliding_ball_mass(u, rr).value;
    CHECK(v >= previous - 1e-12);
    CHECK(v >= ball_mass(u, {}, rr) - 1e-9);
    previous = v;
  }
  CHECK_THROWS_AS(sliding_ball_mass(u, 2.0 * g.dx()), ResolutionError);
}

TEST_CASE("disc cell fractions") {
  CHECK(disc_cell_fraction({0.0, 0.0}, 0.1, 1.0) == 1.0);
  CHECK(disc_cell_fraction({2.0, 0.0}, 0.1, 1.0) == 0.0);
  CHECK(disc_cell_fraction({1.0, 0.0}, 0.1, 1.0) == doctest::Approx(0.5).epsilon(0.05));
  const GridSpec g = make_grid(8.0, 128);
  Field one(g);
  for (double& v : one.values()) v = 1.0;
  CHECK(ball_mass(one, {0.3, 0.1}, 2.0) == doctest::Approx(4.0 * kPi).epsilon(1e-3));
}

TEST_CASE("mollified atoms: sliding mass rises as the mollifier shrinks") {
  const GridSpec g = make_grid(16.0, 256);
  double previous = 0.0;
  for (double delta : {0.4, 0.2, 0.1, 0.05}) {
    const double v = sliding_ball_mass(mollify_atoms(g, {{Point{}}, {7.0 * kPi}, delta}), 1.0).value;
    CHECK(v > previous);
    CHECK(v < 8.0 * kPi);
    previous = v;
  }
}

TEST_CASE("localization parameters") {
  CHECK(h0_identity_holds(0.5, 0.5));
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unit(0.01, 0.99);
  for (int k = 0; k < 50; ++k) CHECK(h0_identity_holds(unit(rng), unit(rng)));

  const LocalizationParams p = make_localization_params(4.0 * kPi, kPi, 0.5, 7.0 * kPi, 0.5, 0.5);
  CHECK(p.h0_identity_exact);
  CHECK(p.H0 == doctest::Approx(0.5 * (1.0 - 0.5625)));
  CHECK(p.H1 == doctest::Approx(0.25 * (1.0 - 0.5625)));
  CHECK(p.R0 == doctest::Approx(6.0 * 128.0 * 4.0 * kPi));
  CHECK(p.beta * p.beta <= 0.25 * p.H1 * (1.0 + 1e-15));
  CHECK_THROWS_AS(make_localization_params(4.0 * kPi, kPi, 0.5, 7.5 * kPi, 0.5, 0.5), ConfigError);
  CHECK_THROWS_AS(make_localization_params(4.0 * kPi, kPi, 0.5, 7.0 * kPi, 1.0, 0.5), ConfigError);
}

TEST_CASE("lemma L0 examples") {
  const GridSpec g = make_grid(8.0, 128);
  const LocalizationParams p = make_localization_params(4.0 * kPi, kPi, 0.5, 7.0 * kPi, 0.5, 0.5);

  // (i): mass (1 - delta) m inside B(rho)
  Field w(g);
  for (int j = 0; j < g.n(); ++j)
    for (int i = 0; i < g.n(); ++i) w(i, j) = std::hypot(g.coord(i), g.coord(j)) <= 0.4 ? 1.0 : 0.0;
  w *= (1.0 - p.delta) * p.m / w.mass();
  const L0Verdict i = lemma_L0_check(w, p, L0Part::i);
  CHECK(i.hypothesis);
  CHECK(i.conclusion);
  CHECK((1.0 - p.H0) * p.m - i.psi_moment >= 0.0);

  for (L0Part part : {L0Part::i, L0Part::ii, L0Part::iii}) CHECK(lemma_L0_check(Field(g), p, part).holds);

  // (iii) with H = 1/2: uniform on B(1) gives beta^2 m = m/8 <= 3m/4
  LocalizationParams h = p;
  h.H1 = 0.5;
  h.beta = std::sqrt(h.H1 / 4.0);
  Field disc(g);
  for (int j = 0; j < g.n(); ++j)
    for (int i = 0; i < g.n(); ++i) disc(i, j) = std::hypot(g.coord(i), g.coord(j)) <= 1.0 ? 1.0 : 0.0;
  disc *= h.m / disc.mass();
  const L0Verdict iii = lemma_L0_check(disc, h, L0Part::iii);
  CHECK(iii.hypothesis);
  CHECK(iii.inner_mass == doctest::Approx(h.m / 8.0).epsilon(0.05));
  CHECK(iii.holds);
}

TEST_CASE("lemma L0 implications hold on random fields") {
  const GridSpec g = make_grid(16.0, 128);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> rho(0.2, 0.9), delta(0.05, 0.9), mass(1.0, 30.0);
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const LocalizationParams p = make_localization_params(10.0, kPi, 0.5, 7.0 * kPi, rho(rng), delta(rng));
    const Field w = random_bumps(g, seed, 0.8, mass(rng));
    for (L0Part part : {L0Part::i, L0Part::ii, L0Part::iii}) CHECK(lemma_L0_check(w, p, part).holds);
  }
}

TEST_CASE("monitoring a zero trajectory is a vacuous pass") {
  const GridSpec g = make_grid(8.0, 64);
  const LocalizationParams p = make_localization_params(1.0, kPi, 0.5, 7.0 * kPi, 0.5, 0.5);
  const LocalizationReport r = monitor_localization(zero_trajectory(g), p, {{{}, 1.0}});
  CHECK(r.pass());
  REQUIRE(r.probes.size() == 1);
  CHECK_FALSE(r.probes[0].hypothesis_ever);
  CHECK(r.probes[0].first_sliding_violation < 0.0);
  for (const ProbeSample& s : r.probes[0].samples) CHECK(s.derivative == 0.0);

  const Trajectory zero = zero_trajectory(g);
  CHECK(hyper_norm_series(zero, 4.0 / 3.0).sup_value == 0.0);
}

TEST_CASE("supercritical data violate the sliding-mass hypothesis before blow-up") {
  const GridSpec g = make_grid(16.0, 128);
  const Trajectory traj = run(gaussian_run(g, 12.0 * kPi, 1.0, 0.02));
  REQUIRE(traj.outcome == Outcome::blowup);
  const LocalizationParams p = make_localization_params(12.0 * kPi, kPi, 0.5, 7.0 * kPi, 0.5, 0.5);
  const LocalizationReport r = monitor_localization(traj, p, {{{}, 1.0}});
  REQUIRE(r.probes.size() == 1);
  CHECK(r.probes[0].first_sliding_violation > 0.0);
  CHECK(r.probes[0].first_sliding_violation < traj.t_outcome);
  CHECK(r.probes[0].envelope_pass);
}

TEST_CASE("moment series along a subcritical run") {
  const GridSpec g = make_grid(16.0, 128);
  const Trajectory traj = run(gaussian_run(g, 4.0 * kPi, 0.5, 0.05));
  REQUIRE(traj.outcome == Outcome::completed);
  const double M = traj.initial_mass();
  const MomentSeries ms = moment_series(traj, build_psi(g, {}, 2.0));
  for (double l : ms.lambda) {
    CHECK(l >= 0.0);
    CHECK(l <= M);
  }
  CHECK(ms.integration_defect() < 2e-2 * M);
  CHECK(ms.fd_relative_error() < 2e-2);

  const LocalizationParams p = make_localization_params(M, kPi, 0.5, 7.0 * kPi, 0.5, 0.5);
  const LocalizationReport r = monitor_localization(traj, p, {{{}, 2.0}});
  REQUIRE(r.probes.size() == 1);
  const ProbeReport& probe = r.probes[0];
  CHECK(probe.pass());
  REQUIRE(probe.cascade.size() >= 2);
  CHECK(probe.cascade[0].checked);
  CHECK(probe.cascade[1].checked);

  const auto path = std::filesystem::temp_directory_path() / "ksl_moment_test.csv";
  write_moment_csv(path, probe, p);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("t,lambda,dlambda_formula,dlambda_fd,inner_mass,sliding_mass,far_sliding_mass,hypothesis", 0) == 0);
  std::filesystem::remove(path);
}

TEST_CASE("finite-difference comparison on exact data") {
  // Lambda = t^2: the midpoint derivative equals the mean of the endpoint derivatives
  const std::vector<double> t{0.0, 0.1, 0.3, 0.6};
  std::vector<double> formula, fd;
  for (double s : t) formula.push_back(2.0 * s);
  for (std::size_t k = 0; k + 1 < t.size(); ++k) fd.push_back((t[k + 1] * t[k + 1] - t[k] * t[k]) / (t[k + 1] - t[k]));
  CHECK(fd_relative_error(formula, fd) < 1e-14);
  fd[1] *= 1.1;
  CHECK(fd_relative_error(formula, fd) > 0.0);
}

TEST_CASE("hypercontractive series of the heat flow") {
  // t^{1/4} ||G_{s^2 + 2t}||_{4/3} M increases toward its atomic plateau
  const GridSpec g = make_grid(16.0, 128);
  SimConfig c = gaussian_run(g, 2.0, 1.0, 0.25);
  c.zero_coupling = true;
  const Trajectory traj = run(c);
  const HyperNormRecord rec = hyper_norm_series(traj, 4.0 / 3.0);
  const double p = 4.0 / 3.0;
  for (const auto& [t, v] : rec.samples) {
    const double var = 1.0 + 2.0 * t;
    const double exact = 2.0 * std::pow(t, 1.0 - 1.0 / p) * std::pow(2.0 * kPi * var, 1.0 / p - 1.0) * std::pow(p, -1.0 / p);
    CHECK(v == doctest::Approx(exact).epsilon(1e-6));
  }
  CHECK(rec.sup_value == rec.samples.back().second);
}
